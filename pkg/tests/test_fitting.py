"""Fitting harness: forward models, cost, optimizers, benchmark."""
import numpy as np
import pytest

from asymfrac import dataio
from asymfrac.asymptotics import solve_single_constraint
from asymfrac.fitting import (DataPoint, FitProblem, GeneticSpec,
                              MonteCarloEngine, NelderMeadSpec, benchmark,
                              build_clocks, cost, fit, forward_model,
                              free_parameters)
from asymfrac.optimizers import genetic, nelder_mead

LINEXP_FAMILY = {"propagation": "linexp", "deactivation": "linexp",
                 "backbiting": "linexp"}
EXP_FAMILY = {"propagation": "exp", "deactivation": "exp", "backbiting": "exp"}
SOLUTION_THETA = dict(dataio.REFERENCE_PRESETS["solution-synth"])


def wide_bounds(theta, factor=30.0):
    return {k: ((0.0 if k.startswith("b") else v / factor), v * factor)
            for k, v in theta.items()}


def solution_problem(**overrides):
    ds = dataio.generate_synthetic(SOLUTION_THETA, LINEXP_FAMILY,
                                   np.logspace(-2, 1, 10))
    kwargs = dict(data=ds.points, family=LINEXP_FAMILY, theta0=SOLUTION_THETA,
                  bounds=wide_bounds(SOLUTION_THETA))
    kwargs.update(overrides)
    return FitProblem(**kwargs)


class TestOptimizers:
    def test_nelder_mead_quadratic(self):
        res = nelder_mead(lambda x: float(np.sum((x - 1.5) ** 2)),
                          np.zeros(3), initial_step=0.5, max_iterations=500)
        assert res.converged
        np.testing.assert_allclose(res.x, 1.5, atol=1e-4)

    def test_nelder_mead_budget_exhausted_flag(self):
        res = nelder_mead(lambda x: float(np.sum(x ** 2)), np.ones(2),
                          max_iterations=3, diameter_tol=0.0, fun_tol=0.0)
        assert not res.converged
        assert res.iterations == 3

    def test_nelder_mead_trace_monotone(self):
        res = nelder_mead(lambda x: float(np.sum(x ** 2)), np.ones(4),
                          initial_step=0.3, max_iterations=200)
        best = [f for _, f, _, _ in res.trace]
        assert all(a >= b - 1e-15 for a, b in zip(best, best[1:]))

    def test_genetic_quadratic(self):
        res = genetic(lambda x: float(np.sum((x - 0.3) ** 2)),
                      [(-2.0, 2.0)] * 3, population=40, generations=150,
                      rng=np.random.default_rng(0))
        np.testing.assert_allclose(res.x, 0.3, atol=0.01)

    def test_genetic_deterministic_given_seed(self):
        f = lambda x: float(np.sum((x - 0.3) ** 2))
        a = genetic(f, [(-2.0, 2.0)] * 2, generations=40,
                    rng=np.random.default_rng(5))
        b = genetic(f, [(-2.0, 2.0)] * 2, generations=40,
                    rng=np.random.default_rng(5))
        assert a.fun == b.fun
        np.testing.assert_array_equal(a.x, b.x)

    def test_genetic_stays_in_bounds(self):
        res = genetic(lambda x: float(np.sum(x ** 2)), [(1.0, 2.0)] * 2,
                      generations=50, rng=np.random.default_rng(1))
        assert np.all(res.x >= 1.0) and np.all(res.x <= 2.0)


class TestForwardModel:
    def test_family_parameter_names(self):
        assert free_parameters(LINEXP_FAMILY) == (
            "b_p", "tau_p", "b_r", "tau_r", "b_d", "tau_d")
        assert free_parameters(EXP_FAMILY) == ("tau_p", "tau_r", "tau_d")

    def test_concentration_scaling(self):
        clocks = build_clocks(SOLUTION_THETA, 2.0, LINEXP_FAMILY,
                              monomer_conc=4.0)
        assert clocks["propagation"].b == SOLUTION_THETA["b_p"] / 4.0
        assert clocks["propagation"].tau == SOLUTION_THETA["tau_p"] / 4.0
        assert clocks["deactivation"].tau == SOLUTION_THETA["tau_d"] / 2.0
        assert clocks["backbiting"].b == SOLUTION_THETA["b_r"]

    def test_exponential_family_concentration_invariant(self):
        # unit propagation and backbiting rates: branching fraction is
        # 1/(1 + n0) at every control-agent concentration
        theta = {"tau_p": 1.0, "tau_r": 1.0, "tau_d": 0.37}
        problem = FitProblem(
            data=(DataPoint(1.0, 0.25, 0.2, 0.3),), family=EXP_FAMILY,
            theta0=theta, bounds=wide_bounds(theta))
        for conc in (0.01, 0.5, 1.0, 10.0, 250.0):
            assert forward_model(theta, conc, problem) == pytest.approx(
                0.25, abs=1e-12)

    def test_zero_concentration_disables_deactivation(self):
        problem = solution_problem()
        r0 = forward_model(SOLUTION_THETA, 0.0, problem)
        clocks = build_clocks(SOLUTION_THETA, 0.0, LINEXP_FAMILY)
        expected = solve_single_constraint(
            clocks["propagation"], clocks["backbiting"], 3).ratio(
                "constrained", "free")
        assert r0 == pytest.approx(expected, abs=1e-14)

    def test_cross_engine_agreement(self):
        problem = solution_problem()
        r_analytic = forward_model(SOLUTION_THETA, 1.0, problem)
        mc = solution_problem(engine=MonteCarloEngine(events=10**5,
                                                      replicates=20, seed=5))
        r_mc = forward_model(SOLUTION_THETA, 1.0, mc)
        # reference standard error from an independent replicate batch
        from asymfrac.simulator import SimConfig, run_replicates
        from asymfrac.asymptotics import crp_model
        clocks = build_clocks(SOLUTION_THETA, 1.0, LINEXP_FAMILY)
        config = SimConfig(model=crp_model(clocks["propagation"],
                                           clocks["deactivation"],
                                           clocks["backbiting"], 3),
                           sample_size=10**5, seed=5, replicates=20)
        se = run_replicates(config).summary[("backbiting", "propagation")].stderr
        assert abs(r_mc - r_analytic) <= 3.0 * se

    def test_mc_forward_deterministic(self):
        mc = solution_problem(engine=MonteCarloEngine(events=2000,
                                                      replicates=3, seed=9))
        assert forward_model(SOLUTION_THETA, 1.0, mc) == \
            forward_model(SOLUTION_THETA, 1.0, mc)

    def test_monotone_response_mixed_family(self):
        # exponential propagation/deactivation with linexp backbiting: the
        # branching fraction falls as the control agent concentration grows
        family = {"propagation": "exp", "deactivation": "exp",
                  "backbiting": "linexp"}
        theta = {"tau_p": 1.0, "b_r": 5.94, "tau_r": 5.97, "tau_d": 4.78e-2}
        problem = FitProblem(data=(DataPoint(1.0, 0.1, 0.05, 0.15),),
                             family=family, theta0=theta,
                             bounds=wide_bounds(theta))
        concs = np.logspace(-2, 1, 12)
        values = [forward_model(theta, c, problem) for c in concs]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert values[0] > values[-1]


class TestCost:
    def test_exact_fit_has_zero_cost(self):
        problem = solution_problem()
        assert cost(SOLUTION_THETA, problem) < 1e-12

    def test_unit_residual(self):
        problem = solution_problem()
        y = forward_model(SOLUTION_THETA, 1.0, problem)
        w = y / 4.0   # residual equal to the interval half-width
        point = DataPoint(conc=1.0, y_mid=y - w, y_lo=y - 2 * w, y_hi=y)
        one = solution_problem(data=(point,))
        assert cost(SOLUTION_THETA, one) == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_interval_unit_weight(self):
        problem = solution_problem()
        y = forward_model(SOLUTION_THETA, 1.0, problem)
        point = DataPoint(conc=1.0, y_mid=min(y + 0.05, 1.0),
                          y_lo=min(y + 0.05, 1.0), y_hi=min(y + 0.05, 1.0))
        one = solution_problem(data=(point,))
        assert cost(SOLUTION_THETA, one) == pytest.approx(
            (y - point.y_mid) ** 2, abs=1e-10)

    def test_out_of_bounds_penalty_not_exception(self):
        problem = solution_problem()
        bad = dict(SOLUTION_THETA)
        bad["tau_r"] = problem.bounds["tau_r"][1] * 10.0
        value = cost(bad, problem)
        assert np.isfinite(value) and value >= 1e10

    def test_permutation_invariance(self):
        problem = solution_problem()
        shuffled = FitProblem(data=tuple(reversed(problem.data)),
                              family=problem.family, theta0=problem.theta0,
                              bounds=problem.bounds)
        # reversed concentrations violate sort order at the dataset level but
        # FitProblem accepts any order; the cost is a plain sum
        assert cost(SOLUTION_THETA, shuffled) == pytest.approx(
            cost(SOLUTION_THETA, problem), abs=1e-15)

    def test_mc_engine_cost_noisy_but_finite(self):
        mc = solution_problem(engine=MonteCarloEngine(events=500, seed=3))
        value = cost(SOLUTION_THETA, mc)
        assert np.isfinite(value)


class TestFit:
    def test_single_free_parameter_exact(self):
        # pin two of the three exponential scales with degenerate bounds
        theta_true = {"tau_p": 1.0, "tau_r": 2.0, "tau_d": 0.3}
        hidden = FitProblem(data=(DataPoint(1.0, 0.5, 0.5, 0.5),),
                            family=EXP_FAMILY, theta0=theta_true,
                            bounds=wide_bounds(theta_true))
        y = forward_model(theta_true, 1.0, hidden)
        problem = FitProblem(
            data=(DataPoint(conc=1.0, y_mid=y, y_lo=y, y_hi=y),),
            family=EXP_FAMILY,
            theta0={"tau_p": 1.0, "tau_r": 1.0, "tau_d": 0.3},
            bounds={"tau_p": (1.0, 1.0), "tau_r": (0.1, 10.0),
                    "tau_d": (0.3, 0.3)},
            optimizer=NelderMeadSpec(max_iterations=600, fun_tol=1e-16,
                                     diameter_tol=1e-10))
        result = fit(problem)
        assert result.cost < 1e-10
        assert result.theta["tau_r"] == pytest.approx(2.0, rel=1e-4)
        assert result.theta["tau_p"] == 1.0 and result.theta["tau_d"] == 0.3

    def test_nelder_mead_recovers_curve(self):
        theta0 = {k: v * 1.4 for k, v in SOLUTION_THETA.items()}
        problem = solution_problem(
            theta0=theta0, optimizer=NelderMeadSpec(max_iterations=1500))
        result = fit(problem)
        assert result.converged
        assert result.cost < 1e-10
        for (conc, model), point in zip(result.per_point, problem.data):
            assert abs(model - point.y_mid) < 1e-4

    def test_fit_respects_bounds(self):
        theta0 = {k: v for k, v in SOLUTION_THETA.items()}
        bounds = wide_bounds(SOLUTION_THETA, factor=2.0)
        problem = solution_problem(
            theta0=theta0, bounds=bounds,
            optimizer=NelderMeadSpec(max_iterations=120))
        result = fit(problem)
        for name, value in result.theta.items():
            lo, hi = bounds[name]
            assert lo <= value <= hi

    def test_non_converged_flag(self):
        problem = solution_problem(
            optimizer=NelderMeadSpec(max_iterations=2, diameter_tol=0.0,
                                     fun_tol=0.0))
        result = fit(problem)
        assert not result.converged

    def test_genetic_recovers_curve_roughly(self):
        problem = solution_problem(
            optimizer=GeneticSpec(population=64, generations=150,
                                  stagnation=60, seed=11))
        result = fit(problem)
        for (conc, model), point in zip(result.per_point, problem.data):
            assert abs(model - point.y_mid) < 1e-2

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            solution_problem(theta0={"tau_p": 1.0})
        with pytest.raises(ValueError):
            solution_problem(data=())
        bad_bounds = wide_bounds(SOLUTION_THETA)
        bad_bounds["tau_r"] = (0.0, 10.0)   # tau must be strictly positive
        with pytest.raises(ValueError):
            solution_problem(bounds=bad_bounds)


class TestBenchmark:
    def test_report_structure_and_timing_series(self):
        problem = solution_problem(
            data=solution_problem().data[:4],
            engine=MonteCarloEngine(events=200, replicates=1, seed=2),
            optimizer=NelderMeadSpec(max_iterations=50))
        report = benchmark(problem, iterations=5)
        assert report.iterations == 5
        assert report.events == 200
        assert "analytical" in report.engines
        mc_rows = [k for k in report.engines if k.startswith("monte_carlo[")]
        assert mc_rows
        for entry in report.engines.values():
            assert entry["wall_time"] > 0.0
            assert len(entry["cumulative_time"]) == 5
            assert entry["cumulative_time"] == sorted(entry["cumulative_time"])
        assert set(report.speedup) == {k.split("[")[1].rstrip("]")
                                       for k in mc_rows}

    def test_speedup_grows_with_sample_size(self):
        problem = solution_problem(
            data=solution_problem().data[:4],
            optimizer=NelderMeadSpec(max_iterations=50))
        small = benchmark(problem, iterations=4, events=100)
        large = benchmark(problem, iterations=4, events=10000)
        assert large.speedup["python"] > small.speedup["python"]

    def test_structurally_deterministic(self):
        problem = solution_problem(
            data=solution_problem().data[:3],
            engine=MonteCarloEngine(events=100, replicates=1, seed=2))
        a = benchmark(problem, iterations=3)
        b = benchmark(problem, iterations=3)
        assert set(a.engines) == set(b.engines)
        assert (a.iterations, a.events, a.points) == \
            (b.iterations, b.events, b.points)


class TestMcConvergesToAnalytical:
    def test_error_decays_with_sample_size(self):
        # symmetric exponential clocks: every outcome frequent, ratio 0.25
        theta = {"tau_p": 1.0, "tau_r": 1.0, "tau_d": 1.0}
        base = dict(data=(DataPoint(1.0, 0.25, 0.2, 0.3),), family=EXP_FAMILY,
                    theta0=theta, bounds=wide_bounds(theta))
        r_star = forward_model(theta, 1.0, FitProblem(**base))
        assert r_star == pytest.approx(0.25, abs=1e-12)
        rms = {}
        for g in (10**3, 10**4, 10**5):
            errs = []
            for seed in range(10):
                mc = FitProblem(**base, engine=MonteCarloEngine(
                    events=g, replicates=1, seed=seed))
                errs.append(forward_model(theta, 1.0, mc) - r_star)
            rms[g] = float(np.sqrt(np.mean(np.square(errs))))
        assert rms[10**3] > rms[10**5]
        # two decades in G shrink the error by roughly 10x
        assert 3.0 < rms[10**3] / rms[10**5] < 33.0
