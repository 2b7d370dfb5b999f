"""Derivative-free minimizers used by the fitting harness.

Both record a per-iteration trace (best cost, best point, elapsed seconds)
so callers can reconstruct convergence and timing curves.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["OptimizerResult", "nelder_mead", "genetic"]


@dataclass
class OptimizerResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    trace: list = field(default_factory=list)   # (iteration, fun, x, elapsed)


def nelder_mead(f, x0, *, initial_step=0.1, max_iterations=500,
                diameter_tol=1e-8, fun_tol=1e-10,
                reflection=1.0, expansion=2.0, contraction=0.5,
                shrink=0.5) -> OptimizerResult:
    """Simplex descent; stops when the simplex diameter or the cost spread
    across vertices collapses, whichever happens first."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    step = np.broadcast_to(np.asarray(initial_step, dtype=float), (n,))

    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += step[i] if step[i] != 0.0 else 1e-4
    values = np.array([f(v) for v in simplex])
    evaluations = n + 1

    t0 = time.perf_counter()
    trace = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]

        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        spread = values[-1] - values[0]
        if diameter < diameter_tol or spread < fun_tol:
            converged = True
            trace.append((iteration, float(values[0]), simplex[0].copy(),
                          time.perf_counter() - t0))
            break

        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + reflection * (centroid - simplex[-1])
        fr = f(xr)
        evaluations += 1
        if fr < values[0]:
            xe = centroid + expansion * (xr - centroid)
            fe = f(xe)
            evaluations += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = centroid + contraction * (xr - centroid)
            else:
                xc = centroid + contraction * (simplex[-1] - centroid)
            fc = f(xc)
            evaluations += 1
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                # contraction failed on both sides: shrink toward the best
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + shrink * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
                evaluations += n
        best = int(np.argmin(values))
        trace.append((iteration, float(values[best]), simplex[best].copy(),
                      time.perf_counter() - t0))

    best = int(np.argmin(values))
    return OptimizerResult(x=simplex[best].copy(), fun=float(values[best]),
                           iterations=iteration, evaluations=evaluations,
                           converged=converged, trace=trace)


def genetic(f, bounds, *, population=48, generations=300, crossover_rate=0.9,
            blend_alpha=0.5, mutation_rate=0.15, mutation_scale=0.1,
            mutation_decay=0.995, elitism=2, stagnation=60,
            stagnation_tol=1e-12, rng=None) -> OptimizerResult:
    """Real-coded genetic search inside a bounding box.

    Tournament selection, blend crossover, Gaussian mutation with a slowly
    decaying scale, and elitism.  Stops early once the best cost has not
    improved by more than ``stagnation_tol`` for ``stagnation`` generations
    (reported as converged); exhausting the generation budget while still
    improving is reported as not converged.
    """
    if rng is None:
        rng = np.random.default_rng()
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi < lo):
        raise ValueError("each bound must satisfy lo <= hi")
    n = len(bounds)
    span = hi - lo

    pop = lo + rng.random((population, n)) * span
    values = np.array([f(x) for x in pop])
    evaluations = population

    t0 = time.perf_counter()
    trace = []
    best_idx = int(np.argmin(values))
    best_x = pop[best_idx].copy()
    best_f = float(values[best_idx])
    since_improvement = 0
    converged = False
    generation = 0

    for generation in range(1, generations + 1):
        order = np.argsort(values, kind="stable")
        elite = pop[order[:elitism]].copy()
        elite_vals = values[order[:elitism]].copy()

        # tournament selection (size 3)
        contenders = rng.integers(0, population, size=(population, 3))
        winners = contenders[np.arange(population),
                             np.argmin(values[contenders], axis=1)]
        parents = pop[winners]

        children = parents.copy()
        scale = mutation_scale * mutation_decay ** generation
        for i in range(0, population - 1, 2):
            if rng.random() < crossover_rate:
                a, b = parents[i], parents[i + 1]
                low = np.minimum(a, b) - blend_alpha * np.abs(a - b)
                high = np.maximum(a, b) + blend_alpha * np.abs(a - b)
                children[i] = low + rng.random(n) * (high - low)
                children[i + 1] = low + rng.random(n) * (high - low)
        mutate = rng.random((population, n)) < mutation_rate
        children = np.where(mutate,
                            children + rng.normal(0.0, scale, (population, n)) * span,
                            children)
        children = np.clip(children, lo, hi)

        values = np.array([f(x) for x in children])
        evaluations += population
        pop = children
        # keep the elite alive
        worst = np.argsort(values, kind="stable")[-elitism:]
        pop[worst] = elite
        values[worst] = elite_vals

        gen_best = int(np.argmin(values))
        if values[gen_best] < best_f - stagnation_tol:
            best_f = float(values[gen_best])
            best_x = pop[gen_best].copy()
            since_improvement = 0
        else:
            if values[gen_best] < best_f:
                best_f = float(values[gen_best])
                best_x = pop[gen_best].copy()
            since_improvement += 1
        trace.append((generation, best_f, best_x.copy(),
                      time.perf_counter() - t0))
        if since_improvement >= stagnation:
            converged = True
            break

    return OptimizerResult(x=best_x, fun=best_f, iterations=generation,
                           evaluations=evaluations, converged=converged,
                           trace=trace)
