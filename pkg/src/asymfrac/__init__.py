"""Asymptotic event frequencies in constrained stochastic processes.

Competing outcomes carry independent waiting-time clocks; constraints gate
which outcomes are possible after which histories.  The package computes
long-run outcome fractions both in closed form (first-to-fire probability
quadrature plus balance algebra) and by constrained kinetic Monte Carlo,
and fits waiting-time pdf parameters to branching-fraction data with either
engine behind a derivative-free optimizer.

Simulation and quadrature hot paths run on a compiled extension when it is
available and on a pure-Python fallback otherwise (``kernels.HAVE_COMPILED``
says which; ``ASYMFRAC_KERNEL=python`` forces the fallback).
"""
from .densities import (DensitySpec, cdf, density, exponential, inverse_cdf,
                        linear_exponential, sample, survival)
from .winprob import (QuadratureError, win_probabilities,
                      win_probabilities_exponential)
from .asymptotics import (AsymptoticResult, EventModel, ModelDegeneracyError,
                          ModelValidationError, UnsupportedTopologyError,
                          crp_model, single_constraint_model, solve_crp,
                          solve_model, solve_single_constraint, validate_model)
from .simulator import SimBatch, SimConfig, SimResult, run, run_replicates
from .fitting import (AnalyticalEngine, BenchReport, DataPoint, FitProblem,
                      FitResult, GeneticSpec, MonteCarloEngine,
                      NelderMeadSpec, benchmark, cost, fit, forward_model)
from .dataio import (Dataset, DatasetError, bundled_dataset,
                     emit_plot_data, generate_synthetic, load_dataset,
                     save_dataset)
from . import kernels

__version__ = "0.1.0"
