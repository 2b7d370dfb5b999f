"""Pure-Python reference kernels.

Two hot paths live here (and, compiled, in ``_ckernels.pyx``):

* ``simulate_events`` -- the constrained minimum-time event loop.  At every
  step one waiting time is drawn, by inverse transform, for each outcome
  whose pairwise occurrence counters satisfy the constraint matrix; the
  smallest draw fires.  Firing outcome ``w`` zeroes row ``w`` of the counter
  matrix (its own requirements start over) and increments column ``w`` for
  every other outcome.

* ``win_probabilities_kernel`` -- adaptive Gauss-Kronrod quadrature for the
  probability that each clock fires first, integrating
  ``f_k(t) * prod_{j != k} (1 - F_j(t))`` on panels split at every linexp
  breakpoint, truncated where the joint survival product drops below a
  floor.

Both implementations consume random numbers in the same order (one uniform
per possible outcome, ascending outcome index, one ``next_double`` each),
so simulation results are bit-for-bit identical across kernels for a given
generator state.
"""
from __future__ import annotations

import math

import numpy as np

KIND_EXP = 0
KIND_LINEXP = 1


def simulate_events(n_events, kinds, b, tau, constraints, rng, counts_out,
                    log_out=None):
    """Fire ``n_events`` events of the constrained process; fill ``counts_out``.

    ``kinds``/``b``/``tau`` describe one clock per outcome (``KIND_EXP`` or
    ``KIND_LINEXP``); ``constraints[i][j]`` is the number of ``j`` firings
    outcome ``i`` must wait for since its own last firing.  ``log_out``, when
    given, receives the fired outcome index of every event.
    """
    n = len(kinds)
    log_ = math.log
    sqrt_ = math.sqrt
    uniform = rng.random
    inf = math.inf

    is_exp = [kinds[i] == KIND_EXP or b[i] == 0.0 for i in range(n)]
    area = [b[i] * b[i] + 2.0 * b[i] * tau[i] for i in range(n)]
    f_break = [b[i] / (b[i] + 2.0 * tau[i]) if b[i] > 0.0 else 0.0 for i in range(n)]
    tail_coef = [area[i] / (2.0 * b[i] * tau[i]) if b[i] > 0.0 else 0.0 for i in range(n)]
    b = [float(v) for v in b]
    tau = [float(v) for v in tau]
    rows = [[int(constraints[i][j]) for j in range(n)] for i in range(n)]

    counters = [[0] * n for _ in range(n)]
    counts = [0] * n

    for step in range(n_events):
        winner = -1
        t_min = inf
        for i in range(n):
            need = rows[i]
            have = counters[i]
            possible = True
            for j in range(n):
                if have[j] < need[j]:
                    possible = False
                    break
            if not possible:
                continue
            u = uniform()
            if is_exp[i]:
                t = -tau[i] * log_(1.0 - u)
            elif u < f_break[i]:
                t = sqrt_(u * area[i])
            else:
                t = b[i] - tau[i] * log_((1.0 - u) * tail_coef[i])
            if t < t_min:
                t_min = t
                winner = i
        counts[winner] += 1
        if log_out is not None:
            log_out[step] = winner
        wrow = counters[winner]
        for j in range(n):
            wrow[j] = 0
        for i in range(n):
            if i != winner:
                counters[i][winner] += 1

    for i in range(n):
        counts_out[i] = counts[i]


# ---------------------------------------------------------------------------
# Gauss-Kronrod 21/10 rule (QUADPACK dqk21 abscissae and weights)

_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821])
_WG10 = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338])

# 21 ascending nodes on [-1, 1] with Kronrod weights, plus the embedded
# 10-point Gauss weights (zero where a node is Kronrod-only)
NODES = np.concatenate([-_XGK[:10], _XGK[10::-1]])
KRONROD_W = np.concatenate([_WGK[:10], _WGK[10::-1]])
_gauss_half = np.zeros(11)
_gauss_half[1::2] = _WG10
GAUSS_W = np.concatenate([_gauss_half[:10], _gauss_half[10::-1]])


def _survival_product(t, kinds, b, tau):
    out = 1.0
    for i in range(len(kinds)):
        if kinds[i] == KIND_EXP or b[i] == 0.0:
            out *= math.exp(-t / tau[i])
        elif t < b[i]:
            out *= 1.0 - t * t / (b[i] * b[i] + 2.0 * b[i] * tau[i])
        else:
            a = b[i] * b[i] + 2.0 * b[i] * tau[i]
            out *= (2.0 * b[i] * tau[i] / a) * math.exp(-(t - b[i]) / tau[i])
    return out


def _truncation_point(kinds, b, tau, floor):
    """Bisect for the time where the joint survival product crosses ``floor``.

    The product is monotone nonincreasing, so past the returned point the
    omitted tail of every component integral is bounded by ``floor``.
    """
    beta = sum(1.0 / t for t in tau)
    hi = max(max(b), 1.0 / beta)
    while _survival_product(hi, kinds, b, tau) > floor:
        hi *= 2.0
    lo = 0.0
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if _survival_product(mid, kinds, b, tau) > floor:
            lo = mid
        else:
            hi = mid
    return hi


def _initial_edges(kinds, b, tau, t_end):
    """Panel edges: one panel per inter-breakpoint gap, then the tail past
    the last breakpoint chopped to a few exponential decay lengths so a
    single rule per panel starts out accurate; adaptive splitting does the
    rest."""
    beta = sum(1.0 / t for t in tau)
    points = sorted({float(v) for k, v in zip(kinds, b)
                     if k == KIND_LINEXP and 0.0 < v < t_end})
    edges = [0.0] + points
    base = edges[-1]
    gap = t_end - base
    parts = min(max(1, math.ceil(gap * beta / 8.0)), 16)
    width = gap / parts
    for m in range(1, parts):
        edges.append(base + m * width)
    edges.append(t_end)
    return edges


def _panel_integrals(edges, kinds, b, tau):
    """Kronrod values and |K - G| error estimates, per component per panel."""
    edges = np.asarray(edges)
    half = 0.5 * (edges[1:] - edges[:-1])
    center = 0.5 * (edges[1:] + edges[:-1])
    t = center[:, None] + half[:, None] * NODES[None, :]   # (panels, 21)

    n = len(kinds)
    pdf = np.empty((n, *t.shape))
    sf = np.empty((n, *t.shape))
    for i in range(n):
        if kinds[i] == KIND_EXP or b[i] == 0.0:
            e = np.exp(-t / tau[i])
            pdf[i] = e / tau[i]
            sf[i] = e
        else:
            a = b[i] * (b[i] + 2.0 * tau[i])
            e = np.exp(-(np.maximum(t, b[i]) - b[i]) / tau[i])
            below = t < b[i]
            pdf[i] = np.where(below, 2.0 * t / a, (2.0 * b[i] / a) * e)
            sf[i] = np.where(below, 1.0 - t * t / a, (2.0 * b[i] * tau[i] / a) * e)

    values = np.empty((n, len(half)))
    errors = np.empty((n, len(half)))
    for k in range(n):
        g = pdf[k].copy()
        for j in range(n):
            if j != k:
                g *= sf[j]
        values[k] = (g * KRONROD_W).sum(axis=1) * half
        errors[k] = np.abs((g * (KRONROD_W - GAUSS_W)).sum(axis=1)) * half
    return values, errors


def win_probabilities_kernel(kinds, b, tau, abs_tol, survival_floor, max_panels):
    """First-to-fire probability for each clock.

    Returns ``(p, err, n_panels, converged)``; ``err`` is the per-component
    absolute error estimate actually achieved.
    """
    kinds = [int(v) for v in kinds]
    b = [float(v) for v in b]
    tau = [float(v) for v in tau]
    n = len(kinds)
    if n == 1:
        return np.array([1.0]), np.array([0.0]), 0, True

    t_end = _truncation_point(kinds, b, tau, survival_floor)
    edges = _initial_edges(kinds, b, tau, t_end)

    values, errors = _panel_integrals(edges, kinds, b, tau)
    while np.max(errors.sum(axis=1)) > abs_tol and len(edges) - 1 < max_panels:
        worst = int(np.argmax(errors.sum(axis=0)))
        edges.insert(worst + 1, 0.5 * (edges[worst] + edges[worst + 1]))
        values, errors = _panel_integrals(edges, kinds, b, tau)

    err = errors.sum(axis=1)
    return values.sum(axis=1), err, len(edges) - 1, bool(np.max(err) <= abs_tol)


def win_probabilities_nested_kernel(kinds, b, tau, inner, abs_tol,
                                    survival_floor, max_panels):
    """Win probabilities for the leading ``inner`` clocks and the full set."""
    if not 1 <= inner <= len(kinds):
        raise ValueError("inner subset size out of range")
    p_in, err_in, _, conv_in = win_probabilities_kernel(
        kinds[:inner], b[:inner], tau[:inner], abs_tol, survival_floor,
        max_panels)
    p_full, err_full, _, conv_full = win_probabilities_kernel(
        kinds, b, tau, abs_tol, survival_floor, max_panels)
    return p_in, err_in, p_full, err_full, bool(conv_in and conv_full)
