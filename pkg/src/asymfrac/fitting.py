"""Branching-fraction fitting: forward models, cost, optimizers, benchmark.

The forward model maps pdf parameters ``{b_p, tau_p, b_r, tau_r, b_d,
tau_d}`` (subset fixed by the per-outcome family choice) plus a
control-agent concentration to a branching fraction, through either the
analytical solver or the Monte Carlo simulator.  Concentration scaling:
propagation time parameters are divided by the monomer concentration,
deactivation time parameters by the control-agent concentration (for
exponential pdfs this is exactly mass-action rate scaling; for linexp it is
the matching time dilation), and backbiting is intramolecular, hence
unscaled.  Zero control-agent concentration disables the deactivation clock
altogether.

The cost is interval-half-width-weighted least squares at the interval
midpoints; degenerate intervals get unit weight.  Positivity of the tail
scales is enforced by optimizing their logarithms; breakpoints are searched
in plain coordinates and clamped by the bounds penalty.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .asymptotics import (DEFAULT_N0, crp_branching_fraction, crp_model,
                          single_constraint_model, single_constraint_ratio)
from .densities import EXP, LINEXP, DensitySpec
from .optimizers import genetic, nelder_mead
from .simulator import SimConfig, run_replicates

__all__ = [
    "DataPoint", "AnalyticalEngine", "MonteCarloEngine", "NelderMeadSpec",
    "GeneticSpec", "FitProblem", "FitResult", "BenchReport",
    "free_parameters", "forward_model", "cost", "fit", "benchmark",
]

CRP_FAMILY_OUTCOMES = ("propagation", "deactivation", "backbiting")
_PARAM_SUFFIX = {"propagation": "p", "deactivation": "d", "backbiting": "r"}
_PENALTY = 1e10


@dataclass(frozen=True)
class DataPoint:
    """One measured branching fraction at a control-agent concentration."""

    conc: float
    y_mid: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        vals = (self.conc, self.y_mid, self.y_lo, self.y_hi)
        if any(not math.isfinite(v) for v in vals):
            raise ValueError(f"data point has non-finite fields: {self!r}")
        if self.conc < 0.0:
            raise ValueError(f"concentration must be nonnegative, got {self.conc}")
        if not (self.y_lo <= self.y_mid <= self.y_hi):
            raise ValueError(
                f"interval must satisfy y_lo <= y_mid <= y_hi, got {self!r}")
        if self.y_lo < 0.0 or self.y_hi > 1.0:
            raise ValueError(f"branching fractions must lie in [0, 1]: {self!r}")

    @property
    def weight(self) -> float:
        half = 0.5 * (self.y_hi - self.y_lo)
        return half if half > 0.0 else 1.0

    def as_dict(self) -> dict:
        return {"conc": self.conc, "y_mid": self.y_mid,
                "y_lo": self.y_lo, "y_hi": self.y_hi}


@dataclass(frozen=True)
class AnalyticalEngine:
    def as_dict(self):
        return {"kind": "analytical"}


@dataclass(frozen=True)
class MonteCarloEngine:
    events: int = 10_000
    replicates: int = 1
    seed: int = 1234
    kernel: str = "auto"

    def as_dict(self):
        return {"kind": "monte_carlo", "events": self.events,
                "replicates": self.replicates, "seed": self.seed,
                "kernel": self.kernel}


def engine_from_dict(obj: dict):
    kind = obj.get("kind", "analytical")
    if kind == "analytical":
        return AnalyticalEngine()
    if kind == "monte_carlo":
        return MonteCarloEngine(
            events=int(obj.get("events", 10_000)),
            replicates=int(obj.get("replicates", 1)),
            seed=int(obj.get("seed", 1234)),
            kernel=obj.get("kernel", "auto"))
    raise ValueError(f"unknown engine kind {kind!r}")


@dataclass(frozen=True)
class NelderMeadSpec:
    max_iterations: int = 400
    initial_step: float = 0.1
    diameter_tol: float = 1e-8
    fun_tol: float = 1e-10

    def as_dict(self):
        return {"kind": "nelder_mead", "max_iterations": self.max_iterations,
                "initial_step": self.initial_step,
                "diameter_tol": self.diameter_tol, "fun_tol": self.fun_tol}


@dataclass(frozen=True)
class GeneticSpec:
    population: int = 48
    generations: int = 300
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    mutation_rate: float = 0.15
    mutation_scale: float = 0.1
    mutation_decay: float = 0.995
    elitism: int = 2
    stagnation: int = 60
    seed: int = 7

    def as_dict(self):
        return {"kind": "genetic", "population": self.population,
                "generations": self.generations,
                "crossover_rate": self.crossover_rate,
                "blend_alpha": self.blend_alpha,
                "mutation_rate": self.mutation_rate,
                "mutation_scale": self.mutation_scale,
                "mutation_decay": self.mutation_decay,
                "elitism": self.elitism, "stagnation": self.stagnation,
                "seed": self.seed}


def optimizer_from_dict(obj: dict):
    kind = obj.get("kind", "nelder_mead")
    known = {"nelder_mead": NelderMeadSpec, "genetic": GeneticSpec}
    if kind not in known:
        raise ValueError(f"unknown optimizer kind {kind!r}")
    kwargs = {k: v for k, v in obj.items() if k != "kind"}
    return known[kind](**kwargs)


def free_parameters(family: dict) -> tuple:
    """Parameter names implied by the family choice, in canonical order
    (propagation, backbiting, deactivation)."""
    missing = [o for o in CRP_FAMILY_OUTCOMES if o not in family]
    if missing:
        raise ValueError(f"family must assign a pdf kind to {missing}")
    names = []
    for outcome in ("propagation", "backbiting", "deactivation"):
        kind = family[outcome]
        suffix = _PARAM_SUFFIX[outcome]
        if kind == LINEXP:
            names.append(f"b_{suffix}")
        elif kind != EXP:
            raise ValueError(f"family for {outcome!r} must be "
                             f"'{EXP}' or '{LINEXP}', got {kind!r}")
        names.append(f"tau_{suffix}")
    return tuple(names)


@dataclass
class FitProblem:
    data: tuple
    family: dict
    theta0: dict
    bounds: dict
    monomer_conc: float = 1.0
    n0: int = DEFAULT_N0
    engine: Union[AnalyticalEngine, MonteCarloEngine] = field(
        default_factory=AnalyticalEngine)
    optimizer: Union[NelderMeadSpec, GeneticSpec] = field(
        default_factory=NelderMeadSpec)

    def __post_init__(self):
        self.data = tuple(self.data)
        if not self.data:
            raise ValueError("need at least one data point")
        if self.monomer_conc <= 0.0:
            raise ValueError("monomer concentration must be positive")
        names = free_parameters(self.family)
        if set(self.theta0) != set(names):
            raise ValueError(f"theta0 must provide exactly {names}, "
                             f"got {tuple(sorted(self.theta0))}")
        if set(self.bounds) != set(names):
            raise ValueError(f"bounds must cover exactly {names}")
        for name in names:
            lo, hi = self.bounds[name]
            if not (lo <= hi):
                raise ValueError(f"bound for {name} has lo > hi")
            if name.startswith("tau") and lo <= 0.0:
                raise ValueError(f"tau bounds must be strictly positive ({name})")
            if name.startswith("b") and lo < 0.0:
                raise ValueError(f"b bounds must be nonnegative ({name})")
            if not (lo <= self.theta0[name] <= hi):
                raise ValueError(f"theta0[{name!r}]={self.theta0[name]} "
                                 f"outside bounds [{lo}, {hi}]")

    @property
    def parameter_names(self) -> tuple:
        return free_parameters(self.family)

    def as_dict(self) -> dict:
        return {
            "data": [p.as_dict() for p in self.data],
            "family": dict(self.family),
            "theta0": dict(self.theta0),
            "bounds": {k: list(v) for k, v in self.bounds.items()},
            "monomer_conc": self.monomer_conc,
            "n0": self.n0,
            "engine": self.engine.as_dict(),
            "optimizer": self.optimizer.as_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict, data=None) -> "FitProblem":
        if data is None:
            data = [DataPoint(**p) for p in obj["data"]]
        return cls(
            data=tuple(data),
            family=dict(obj["family"]),
            theta0={k: float(v) for k, v in obj["theta0"].items()},
            bounds={k: (float(v[0]), float(v[1]))
                    for k, v in obj["bounds"].items()},
            monomer_conc=float(obj.get("monomer_conc", 1.0)),
            n0=int(obj.get("n0", DEFAULT_N0)),
            engine=engine_from_dict(obj.get("engine", {})),
            optimizer=optimizer_from_dict(obj.get("optimizer", {})),
        )


def _spec(kind: str, b: Optional[float], tau: float) -> DensitySpec:
    if kind == LINEXP:
        return DensitySpec(kind=LINEXP, tau=tau, b=b)
    return DensitySpec(kind=EXP, tau=tau)


def _prop_back_clocks(theta: dict, family: dict, monomer_conc: float) -> tuple:
    prop = _spec(family["propagation"],
                 theta.get("b_p", 0.0) / monomer_conc,
                 theta["tau_p"] / monomer_conc)
    back = _spec(family["backbiting"], theta.get("b_r", 0.0), theta["tau_r"])
    return prop, back


def _deact_clock(theta: dict, conc: float, family: dict) -> DensitySpec:
    return _spec(family["deactivation"],
                 theta.get("b_d", 0.0) / conc,
                 theta["tau_d"] / conc)


def build_clocks(theta: dict, conc: float, family: dict,
                 monomer_conc: float = 1.0) -> dict:
    """Concentration-scaled clock specs for one evaluation.

    Returns ``{"propagation": spec, "backbiting": spec}`` plus
    ``"deactivation"`` when the control-agent concentration is positive.
    """
    prop, back = _prop_back_clocks(theta, family, monomer_conc)
    clocks = {"propagation": prop, "backbiting": back}
    if conc > 0.0:
        clocks["deactivation"] = _deact_clock(theta, conc, family)
    return clocks


def analytical_branching_fraction(theta: dict, conc: float, family: dict,
                                  n0: int = DEFAULT_N0,
                                  monomer_conc: float = 1.0) -> float:
    """Closed-route branching fraction, independent of any FitProblem."""
    clocks = build_clocks(theta, conc, family, monomer_conc)
    if "deactivation" not in clocks:
        return single_constraint_ratio(clocks["propagation"],
                                       clocks["backbiting"], n0)
    return crp_branching_fraction(clocks["propagation"], clocks["deactivation"],
                                  clocks["backbiting"], n0)


def _mc_rng_seed(engine: MonteCarloEngine, conc: float) -> int:
    # distinct but reproducible stream per concentration
    return int(np.random.SeedSequence(
        (engine.seed, int(np.float64(conc).view(np.uint64)))).generate_state(1)[0])


def forward_model(theta: dict, conc: float, problem: FitProblem) -> float:
    """Branching fraction at one concentration under the problem's engine."""
    engine = problem.engine
    if isinstance(engine, AnalyticalEngine):
        return analytical_branching_fraction(theta, conc, problem.family,
                                             problem.n0, problem.monomer_conc)
    clocks = build_clocks(theta, conc, problem.family, problem.monomer_conc)

    if "deactivation" not in clocks:
        model = single_constraint_model(
            clocks["propagation"], clocks["backbiting"], problem.n0,
            outcomes=("propagation", "backbiting"))
    else:
        model = crp_model(clocks["propagation"], clocks["deactivation"],
                          clocks["backbiting"], problem.n0)
    config = SimConfig(model=model, sample_size=engine.events,
                       seed=_mc_rng_seed(engine, conc),
                       replicates=engine.replicates,
                       ratio_pairs=(("backbiting", "propagation"),))
    batch = run_replicates(config, kernel=engine.kernel)
    return batch.summary[("backbiting", "propagation")].mean


def cost(theta: dict, problem: FitProblem) -> float:
    """Weighted least squares at interval midpoints.

    Out-of-bounds parameters return a large finite penalty growing with the
    violation, so derivative-free optimizers can walk back inside.  An
    undefined Monte Carlo ratio (no propagation events at a tiny sample
    size) is penalized the same way instead of poisoning the sum with NaN.
    """
    violation = 0.0
    for name in problem.parameter_names:
        lo, hi = problem.bounds[name]
        v = theta[name]
        scale = max(abs(lo), abs(hi), 1.0)
        if v < lo:
            violation += (lo - v) / scale
        elif v > hi:
            violation += (v - hi) / scale
    if violation > 0.0:
        return _PENALTY * (1.0 + violation)
    total = 0.0
    if isinstance(problem.engine, AnalyticalEngine):
        # clock specs for propagation/backbiting do not depend on the
        # concentration; build them once for the whole dataset
        prop, back = _prop_back_clocks(theta, problem.family,
                                       problem.monomer_conc)
        for point in problem.data:
            if point.conc > 0.0:
                r = crp_branching_fraction(
                    prop, _deact_clock(theta, point.conc, problem.family),
                    back, problem.n0)
            else:
                r = single_constraint_ratio(prop, back, problem.n0)
            total += ((r - point.y_mid) / point.weight) ** 2
        return total
    for point in problem.data:
        r = forward_model(theta, point.conc, problem)
        if not math.isfinite(r):
            return _PENALTY
        total += ((r - point.y_mid) / point.weight) ** 2
    return total


# --- parameter-space transform: tau parameters live in log space -----------

def _to_internal(theta: dict, names) -> np.ndarray:
    return np.array([math.log(theta[n]) if n.startswith("tau") else theta[n]
                     for n in names])


def _from_internal(z: np.ndarray, names) -> dict:
    return {n: math.exp(z[i]) if n.startswith("tau") else float(z[i])
            for i, n in enumerate(names)}


def _internal_bounds(problem: FitProblem, names) -> np.ndarray:
    out = []
    for n in names:
        lo, hi = problem.bounds[n]
        if n.startswith("tau"):
            out.append((math.log(lo), math.log(hi)))
        else:
            out.append((lo, hi))
    return np.array(out)


def _clamp(theta: dict, problem: FitProblem) -> dict:
    return {n: min(max(theta[n], problem.bounds[n][0]), problem.bounds[n][1])
            for n in problem.parameter_names}


@dataclass
class FitResult:
    theta: dict
    cost: float
    iterations: int
    evaluations: int
    converged: bool
    trace: list                        # (iteration, cost, theta, elapsed)
    per_point: list                    # (conc, model branching fraction)

    def as_dict(self, include_timing: bool = True) -> dict:
        if include_timing:
            trace = [{"iteration": i, "cost": c, "theta": t, "elapsed": e}
                     for i, c, t, e in self.trace]
        else:
            trace = [{"iteration": i, "cost": c, "theta": t}
                     for i, c, t, _ in self.trace]
        return {
            "theta": dict(self.theta),
            "cost": self.cost,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "trace": trace,
            "per_point": [{"conc": c, "model": r} for c, r in self.per_point],
        }


def fit(problem: FitProblem) -> FitResult:
    """Minimize the cost with the configured optimizer; never leaves bounds.

    Parameters with degenerate bounds (``lo == hi``) are held fixed and not
    searched.
    """
    names = problem.parameter_names
    free = tuple(n for n in names
                 if problem.bounds[n][0] < problem.bounds[n][1])
    pinned = {n: problem.bounds[n][0] for n in names if n not in free}

    def assemble(z) -> dict:
        theta = _from_internal(z, free)
        theta.update(pinned)
        return theta

    if not free:
        theta = dict(pinned)
        j = cost(theta, problem)
        per_point = [(p.conc, forward_model(theta, p.conc, problem))
                     for p in problem.data]
        return FitResult(theta=theta, cost=j, iterations=0, evaluations=1,
                         converged=True, trace=[], per_point=per_point)

    def objective(z):
        return cost(assemble(z), problem)

    spec = problem.optimizer
    if isinstance(spec, NelderMeadSpec):
        opt = nelder_mead(objective, _to_internal(problem.theta0, free),
                          initial_step=spec.initial_step,
                          max_iterations=spec.max_iterations,
                          diameter_tol=spec.diameter_tol,
                          fun_tol=spec.fun_tol)
    elif isinstance(spec, GeneticSpec):
        opt = genetic(objective, _internal_bounds(problem, free),
                      population=spec.population,
                      generations=spec.generations,
                      crossover_rate=spec.crossover_rate,
                      blend_alpha=spec.blend_alpha,
                      mutation_rate=spec.mutation_rate,
                      mutation_scale=spec.mutation_scale,
                      mutation_decay=spec.mutation_decay,
                      elitism=spec.elitism,
                      stagnation=spec.stagnation,
                      rng=np.random.default_rng(spec.seed))
    else:
        raise ValueError(f"unknown optimizer spec {spec!r}")

    theta = _clamp(assemble(opt.x), problem)
    per_point = [(p.conc, forward_model(theta, p.conc, problem))
                 for p in problem.data]
    trace = [(i, f, assemble(x), e) for i, f, x, e in opt.trace]
    return FitResult(theta=theta, cost=opt.fun, iterations=opt.iterations,
                     evaluations=opt.evaluations, converged=opt.converged,
                     trace=trace, per_point=per_point)


# --- engine benchmark -------------------------------------------------------

@dataclass
class BenchReport:
    """Wall time of identical-length optimizer runs per forward engine.

    ``engines`` maps a label (``analytical``, ``monte_carlo[python]``,
    ``monte_carlo[compiled]``) to wall time and a cumulative per-iteration
    time series; ``speedup`` maps a simulator kernel name to
    ``monte_carlo wall time / analytical wall time``.
    """

    iterations: int
    events: int
    replicates: int
    points: int
    engines: dict
    speedup: dict

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "events": self.events,
                "replicates": self.replicates, "points": self.points,
                "engines": self.engines, "speedup": self.speedup}


def _forced_budget_optimizer(spec, iterations: int):
    """Same optimizer family, fixed trajectory length, early stops disabled."""
    if isinstance(spec, NelderMeadSpec):
        return replace(spec, max_iterations=iterations, diameter_tol=0.0,
                       fun_tol=0.0)
    return replace(spec, generations=iterations, stagnation=iterations + 1)


def _timed_fit(problem: FitProblem) -> tuple:
    t0 = time.perf_counter()
    result = fit(problem)
    wall = time.perf_counter() - t0
    series = [e for _, _, _, e in result.trace]
    return wall, series


def benchmark(problem: FitProblem, iterations: int,
              events: Optional[int] = None) -> BenchReport:
    """Run the same fixed-length optimization under each engine and time it.

    The Monte Carlo engine is timed once per available simulator kernel, so
    the report doubles as a compiled-vs-Python kernel comparison.  The
    complexity of one analytical evaluation is constant while Monte Carlo
    work grows linearly with its sample size.
    """
    opt = _forced_budget_optimizer(problem.optimizer, iterations)
    if isinstance(problem.engine, MonteCarloEngine):
        mc_engine = problem.engine
    else:
        mc_engine = MonteCarloEngine()
    if events is not None:
        mc_engine = replace(mc_engine, events=int(events))

    engines = {}
    analytical = replace(problem, engine=AnalyticalEngine(), optimizer=opt)
    wall, series = _timed_fit(analytical)
    engines["analytical"] = {"wall_time": wall, "cumulative_time": series}

    speedup = {}
    for kernel in kernels.available_kernels():
        mc = replace(problem, engine=replace(mc_engine, kernel=kernel),
                     optimizer=opt)
        mc_wall, mc_series = _timed_fit(mc)
        engines[f"monte_carlo[{kernel}]"] = {
            "wall_time": mc_wall, "cumulative_time": mc_series}
        speedup[kernel] = mc_wall / engines["analytical"]["wall_time"]

    return BenchReport(iterations=iterations, events=mc_engine.events,
                       replicates=mc_engine.replicates, points=len(problem.data),
                       engines=engines, speedup=speedup)
