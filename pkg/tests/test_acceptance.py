"""Acceptance suite: one test per criterion, each printing a pass line.

Every tolerance and runtime budget is asserted here; run with ``pytest -v
tests/test_acceptance.py`` (add ``-s`` to see the pass lines as they
happen).
"""
import math
import time

import numpy as np
from scipy import integrate, stats

from asymfrac import dataio, fitting, kernels
from asymfrac.asymptotics import (crp_model, single_constraint_model,
                                  solve_crp, solve_single_constraint)
from asymfrac.densities import (cdf, density, exponential, inverse_cdf,
                                linear_exponential, pack_specs, sample)
from asymfrac.simulator import SimConfig, run, run_replicates
from asymfrac.winprob import win_probabilities

SOLUTION_THETA = dict(dataio.REFERENCE_PRESETS["solution-synth"])
SOLUTION_CLOCKS = (linear_exponential(1.74e-1, 9.1e-1),
                   linear_exponential(2.28e-4, 3.58e-2),
                   linear_exponential(6.53, 1.31))
LINEXP_FAMILY = {"propagation": "linexp", "deactivation": "linexp",
                 "backbiting": "linexp"}


def _report(number, description, t0, budget):
    elapsed = time.perf_counter() - t0
    assert elapsed < budget, (f"criterion {number} exceeded its runtime "
                              f"budget: {elapsed:.1f}s >= {budget}s")
    print(f"ACCEPTANCE {number} PASS ({elapsed:.1f}s): {description}")


def test_criterion_1_single_constraint_closed_form_and_mc():
    t0 = time.perf_counter()
    cases = {1.0: 0.25, 0.2: 0.125}
    for rate_ratio, expected in cases.items():
        res = solve_single_constraint(exponential(1.0),
                                      exponential(1.0 / rate_ratio), n0=3)
        assert abs(res.ratio("constrained", "free") - expected) < 1e-12

    g = 10**4
    for rate_ratio, expected in cases.items():
        model = single_constraint_model(exponential(1.0),
                                        exponential(1.0 / rate_ratio), n0=3)
        for seed in range(5):
            result = run(SimConfig(model=model, sample_size=g, seed=seed))
            f2 = result.counts["constrained"] / g
            se = math.sqrt(f2 * (1.0 - f2) / g) / (1.0 - f2) ** 2
            assert abs(result.ratios[("constrained", "free")] - expected) \
                <= 4.0 * se
    _report(1, "single-constraint closed form, five-seed MC scatter", t0, 10.0)


def test_criterion_2_win_probability_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)

    # all-exponential sets against the closed form
    for _ in range(50):
        n = int(rng.integers(2, 6))
        rates = 10.0 ** rng.uniform(-1.5, 1.5, size=n)
        p = win_probabilities([exponential(1.0 / r) for r in rates])
        assert np.max(np.abs(p - rates / rates.sum())) < 1e-8

    # mixed sets: raw sums within 1e-8, argmin sampling within 4 SE
    impl = kernels.resolve("auto")
    n_draws = 10**6
    for _ in range(50):
        n = int(rng.integers(2, 6))
        specs = []
        for _ in range(n):
            tau = 10.0 ** rng.uniform(-1.3, 0.7)
            if rng.random() < 0.5:
                specs.append(exponential(tau))
            else:
                specs.append(linear_exponential(10.0 ** rng.uniform(-3, 0.7),
                                                tau))
        kinds, b, tau = pack_specs(specs)
        raw, _, _, converged = impl.win_probabilities_kernel(
            kinds, b, tau, 1e-10, 1e-14, 512)
        assert converged
        assert abs(raw.sum() - 1.0) < 1e-8

        p = raw / raw.sum()
        times = np.empty((n, n_draws))
        for i, spec in enumerate(specs):
            times[i] = inverse_cdf(spec, rng.random(n_draws))
        freq = np.bincount(np.argmin(times, axis=0), minlength=n) / n_draws
        se = np.sqrt(p * (1.0 - p) / n_draws)
        assert np.all(np.abs(freq - p) <= 4.0 * se + 1e-12)
    _report(2, "quadrature vs closed form and argmin sampling", t0, 60.0)


def test_criterion_3_deactivation_invariance():
    t0 = time.perf_counter()
    c_p, c_r, n0 = 1.0, 0.7, 3
    expected = c_r / (c_p + n0 * c_r)
    for c_d in 10.0 ** np.linspace(-2.0, 2.0, 20):
        res = solve_crp(exponential(1.0 / c_p), exponential(1.0 / c_d),
                        exponential(1.0 / c_r), n0=n0)
        assert abs(res.ratio("backbiting", "propagation") - expected) < 1e-10
    _report(3, "exponential branching fraction independent of deactivation",
            t0, 5.0)


def _random_linexp_crp_set(rng):
    while True:
        prop = linear_exponential(10.0 ** rng.uniform(-2.0, 0.0),
                                  10.0 ** rng.uniform(-1.0, 0.3))
        deact = linear_exponential(10.0 ** rng.uniform(-3.0, 0.0),
                                   10.0 ** rng.uniform(-0.7, 0.7))
        back = linear_exponential(10.0 ** rng.uniform(-2.0, 0.7),
                                  10.0 ** rng.uniform(-0.7, 0.7))
        res = solve_crp(prop, deact, back, 3)
        if res.fraction("propagation") >= 5e-3 and \
                res.fraction("backbiting") >= 1e-4:
            return (prop, deact, back), res


def test_criterion_4_analytical_vs_mc_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    cases = [(SOLUTION_CLOCKS, solve_crp(*SOLUTION_CLOCKS, 3))]
    while len(cases) < 11:
        cases.append(_random_linexp_crp_set(rng))
    for i, (clocks, res) in enumerate(cases):
        r_analytic = res.ratio("backbiting", "propagation")
        config = SimConfig(model=crp_model(*clocks, n0=3), sample_size=10**5,
                           seed=1000 + i, replicates=20)
        summary = run_replicates(config).summary[("backbiting", "propagation")]
        assert abs(summary.mean - r_analytic) <= 3.0 * summary.stderr, \
            f"set {i}: analytic {r_analytic} vs MC {summary.mean} " \
            f"+/- {summary.stderr}"
    _report(4, "branching fractions agree across engines (11 clock sets)",
            t0, 300.0)


def test_criterion_5_speedup():
    t0 = time.perf_counter()
    ds = dataio.bundled_dataset("solution-synth")
    problem = fitting.FitProblem(
        data=ds.points, family=LINEXP_FAMILY, theta0=SOLUTION_THETA,
        bounds={k: ((0.0 if k.startswith("b") else v / 30.0), v * 30.0)
                for k, v in SOLUTION_THETA.items()},
        engine=fitting.MonteCarloEngine(events=10**4, replicates=1, seed=5),
        optimizer=fitting.NelderMeadSpec())

    # the pure-Python simulator is the reference implementation of the
    # event-by-event method; the compiled kernel's ratio is reported too
    report = fitting.benchmark(problem, iterations=100)
    speedup_1e4 = report.speedup["python"]
    assert speedup_1e4 >= 1e3, f"speedup {speedup_1e4:.0f}x below the floor"

    scaling = {10**4: speedup_1e4}
    for g in (10**2, 10**3):
        scaling[g] = fitting.benchmark(problem, iterations=25,
                                       events=g).speedup["python"]
    for g_small, g_big in ((10**2, 10**3), (10**3, 10**4), (10**2, 10**4)):
        observed = scaling[g_big] / scaling[g_small]
        linear = g_big / g_small
        assert linear / 5.0 <= observed <= linear * 5.0, \
            f"speedup scaling {observed:.1f} vs linear {linear}"
    extra = ""
    if "compiled" in report.speedup:
        extra = f"; compiled-kernel ratio {report.speedup['compiled']:.0f}x"
    _report(5, f"analytical vs MC speedup {speedup_1e4:.0f}x at G=1e4, "
               f"linear in G{extra}", t0, 600.0)


def test_criterion_6_fit_recovery_nelder_mead():
    t0 = time.perf_counter()
    ds = dataio.generate_synthetic(SOLUTION_THETA, LINEXP_FAMILY,
                                   np.logspace(-2, 1, 10))
    problem = fitting.FitProblem(
        data=ds.points, family=LINEXP_FAMILY,
        theta0={k: v * 1.4 for k, v in SOLUTION_THETA.items()},
        bounds={k: ((0.0 if k.startswith("b") else v / 30.0), v * 30.0)
                for k, v in SOLUTION_THETA.items()},
        optimizer=fitting.NelderMeadSpec(max_iterations=2000))
    result = fitting.fit(problem)
    assert result.cost < 1e-10
    for (conc, model), point in zip(result.per_point, ds.points):
        assert abs(model - point.y_mid) < 1e-4
    _report(6, f"Nelder-Mead curve recovery, J={result.cost:.2e}", t0, 300.0)


def test_criterion_6_fit_recovery_genetic():
    t0 = time.perf_counter()
    ds = dataio.generate_synthetic(SOLUTION_THETA, LINEXP_FAMILY,
                                   np.logspace(-2, 1, 10))
    problem = fitting.FitProblem(
        data=ds.points, family=LINEXP_FAMILY, theta0=SOLUTION_THETA,
        bounds={k: ((0.0 if k.startswith("b") else v / 30.0), v * 30.0)
                for k, v in SOLUTION_THETA.items()},
        optimizer=fitting.GeneticSpec(population=64, generations=400,
                                      stagnation=120, seed=11))
    result = fitting.fit(problem)
    for (conc, model), point in zip(result.per_point, ds.points):
        assert abs(model - point.y_mid) < 1e-3
    _report(6, f"genetic-algorithm curve recovery, J={result.cost:.2e}",
            t0, 300.0)


def test_criterion_7_density_layer():
    t0 = time.perf_counter()
    specs = [exponential(1.0), exponential(0.0358),
             linear_exponential(1.0, 1.0),
             linear_exponential(1.74e-1, 9.1e-1),
             linear_exponential(6.53, 1.31),
             linear_exponential(2.28e-4, 3.58e-2)]
    rng = np.random.default_rng(77)
    for spec in specs:
        total, _ = integrate.quad(lambda x: density(spec, x), 0.0,
                                  spec.b + 50.0 * spec.tau,
                                  points=[spec.b] if spec.b > 0 else None,
                                  limit=200, epsabs=1e-13)
        assert abs(total - 1.0) < 1e-10

        for t in rng.uniform(0.0, spec.b + 8.0 * spec.tau, size=8):
            quad_val, _ = integrate.quad(lambda x: density(spec, x), 0.0, t,
                                         points=[spec.b] if 0 < spec.b < t
                                         else None, limit=200, epsabs=1e-12)
            assert abs(cdf(spec, t) - quad_val) < 1e-9

        u = np.arange(0.01, 1.0, 0.01)
        assert np.max(np.abs(cdf(spec, inverse_cdf(spec, u)) - u)) < 1e-10

        draws = sample(spec, rng, size=10**5)
        ks = stats.kstest(draws, lambda t: cdf(spec, t))
        assert ks.statistic < 1.6276 / math.sqrt(draws.size)

    tiny = linear_exponential(1e-12, 2.0)
    ref = exponential(2.0)
    t = np.linspace(0.0, 30.0, 400)
    assert np.max(np.abs(density(tiny, t) - density(ref, t))) < 1e-8
    assert np.max(np.abs(cdf(tiny, t) - cdf(ref, t))) < 1e-8
    _report(7, "density normalization, CDF, sampling, degenerate limit",
            t0, 30.0)
