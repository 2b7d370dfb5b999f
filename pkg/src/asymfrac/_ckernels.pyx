# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: constrained event loop and win-probability quadrature.

Mirrors ``_kernels_py`` exactly -- same draw order (one uniform per possible
outcome, ascending index, straight off the bit generator), same panel and
refinement decisions -- so simulation counts are identical across kernels
and quadrature results agree to rounding.
"""
from libc.math cimport log, sqrt, exp, ceil, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memmove, memset
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

import numpy as np
cimport numpy as cnp

from . import _kernels_py

cdef int KIND_EXP = _kernels_py.KIND_EXP

# Gauss-Kronrod 21/10 nodes and weights, shared with the Python kernel
cdef double[21] NODES
cdef double[21] KW
cdef double[21] GW
for _i in range(21):
    NODES[_i] = _kernels_py.NODES[_i]
    KW[_i] = _kernels_py.KRONROD_W[_i]
    GW[_i] = _kernels_py.GAUSS_W[_i]


# ---------------------------------------------------------------------------
# event loop

cdef inline double _draw(bint is_exp, double b, double tau, double area,
                         double f_break, double tail_coef, double u) nogil:
    if is_exp:
        return -tau * log(1.0 - u)
    if u < f_break:
        return sqrt(u * area)
    return b - tau * log((1.0 - u) * tail_coef)


def simulate_events(long long n_events, kinds, b, tau, constraints, rng,
                    counts_out, log_out=None):
    """Fire ``n_events`` constrained events; fill ``counts_out`` (int64[n])."""
    cdef cnp.uint8_t[::1] kinds_v = np.ascontiguousarray(kinds, dtype=np.uint8)
    cdef double[::1] b_v = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] tau_v = np.ascontiguousarray(tau, dtype=np.float64)
    cdef long long[:, ::1] cons_v = np.ascontiguousarray(constraints, dtype=np.int64)
    cdef long long[::1] counts_v = counts_out
    cdef cnp.int32_t[::1] log_v = None
    cdef bint want_log = log_out is not None
    if want_log:
        log_v = log_out

    cdef Py_ssize_t n = kinds_v.shape[0]
    bit_generator = rng.bit_generator
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef bint *is_exp = <bint *> malloc(n * sizeof(bint))
    cdef double *area = <double *> malloc(n * sizeof(double))
    cdef double *f_break = <double *> malloc(n * sizeof(double))
    cdef double *tail_coef = <double *> malloc(n * sizeof(double))
    cdef long long *counters = <long long *> malloc(n * n * sizeof(long long))
    if not (is_exp and area and f_break and tail_coef and counters):
        free(is_exp); free(area); free(f_break); free(tail_coef); free(counters)
        raise MemoryError()
    memset(counters, 0, n * n * sizeof(long long))

    cdef Py_ssize_t i, j
    for i in range(n):
        is_exp[i] = kinds_v[i] == KIND_EXP or b_v[i] == 0.0
        area[i] = b_v[i] * b_v[i] + 2.0 * b_v[i] * tau_v[i]
        if b_v[i] > 0.0:
            f_break[i] = b_v[i] / (b_v[i] + 2.0 * tau_v[i])
            tail_coef[i] = area[i] / (2.0 * b_v[i] * tau_v[i])
        else:
            f_break[i] = 0.0
            tail_coef[i] = 0.0
        counts_v[i] = 0

    cdef long long step
    cdef Py_ssize_t winner
    cdef double u, t, t_min
    cdef bint possible, stuck = False
    try:
        with bit_generator.lock, nogil:
            for step in range(n_events):
                winner = -1
                t_min = INFINITY
                for i in range(n):
                    possible = True
                    for j in range(n):
                        if counters[i * n + j] < cons_v[i, j]:
                            possible = False
                            break
                    if not possible:
                        continue
                    u = bg.next_double(bg.state)
                    t = _draw(is_exp[i], b_v[i], tau_v[i], area[i],
                              f_break[i], tail_coef[i], u)
                    if t < t_min:
                        t_min = t
                        winner = i
                if winner < 0:
                    stuck = True
                    break
                counts_v[winner] += 1
                if want_log:
                    log_v[step] = <cnp.int32_t> winner
                for j in range(n):
                    counters[winner * n + j] = 0
                for i in range(n):
                    if i != winner:
                        counters[i * n + winner] += 1
    finally:
        free(is_exp); free(area); free(f_break); free(tail_coef); free(counters)
    if stuck:
        raise RuntimeError("no outcome possible; model violates progress condition")


# ---------------------------------------------------------------------------
# win-probability quadrature
#
# per-spec constants, laid out as 6 doubles per spec:
#   [b, inv_tau, area, inv_area, pdf_tail (2b/A), sf_tail (2 b tau / A)]

cdef double _survival_product(double t, Py_ssize_t n, bint *is_exp,
                              double *sc) nogil:
    cdef double out = 1.0
    cdef Py_ssize_t i
    for i in range(n):
        if is_exp[i]:
            out *= exp(-t * sc[6 * i + 1])
        elif t < sc[6 * i]:
            out *= 1.0 - t * t * sc[6 * i + 3]
        else:
            out *= sc[6 * i + 5] * exp((sc[6 * i] - t) * sc[6 * i + 1])
    return out


cdef void _eval_panel(double lo, double hi, Py_ssize_t n, bint *is_exp,
                      double *sc, double *pdf, double *sf,
                      double *val_out, double *err_out) nogil:
    """Kronrod value and |K - G| estimate of every component on one panel."""
    cdef double half = 0.5 * (hi - lo)
    cdef double center = 0.5 * (hi + lo)
    cdef Py_ssize_t m, i, k, j
    cdef double t, e, g
    for k in range(n):
        val_out[k] = 0.0
        err_out[k] = 0.0
    for m in range(21):
        t = center + half * NODES[m]
        for i in range(n):
            if is_exp[i]:
                e = exp(-t * sc[6 * i + 1])
                pdf[i] = e * sc[6 * i + 1]
                sf[i] = e
            elif t < sc[6 * i]:
                pdf[i] = 2.0 * t * sc[6 * i + 3]
                sf[i] = 1.0 - t * t * sc[6 * i + 3]
            else:
                e = exp((sc[6 * i] - t) * sc[6 * i + 1])
                pdf[i] = sc[6 * i + 4] * e
                sf[i] = sc[6 * i + 5] * e
        for k in range(n):
            g = pdf[k]
            for j in range(n):
                if j != k:
                    g *= sf[j]
            val_out[k] += KW[m] * g
            err_out[k] += (KW[m] - GW[m]) * g
    for k in range(n):
        val_out[k] = val_out[k] * half
        err_out[k] = err_out[k] * half
        if err_out[k] < 0.0:
            err_out[k] = -err_out[k]


cdef Py_ssize_t _quadrature(Py_ssize_t n, bint *is_exp, double *sc,
                            double *edges, double *val, double *err,
                            double *pdf, double *sf,
                            double abs_tol, double survival_floor,
                            Py_ssize_t max_panels,
                            double *out_p, double *out_e,
                            bint *converged) nogil:
    """Full adaptive pass for one clock set; returns the panel count."""
    cdef Py_ssize_t i, j, k, p, n_panels, worst, parts
    cdef double beta = 0.0, bmax = 0.0
    cdef double t_lo, t_hi, mid, t_end, gap, width, total, worst_err, emax

    for i in range(n):
        beta += sc[6 * i + 1]
        if not is_exp[i] and sc[6 * i] > bmax:
            bmax = sc[6 * i]

    # truncate where the joint survival product crosses the floor
    t_hi = bmax if bmax > 1.0 / beta else 1.0 / beta
    while _survival_product(t_hi, n, is_exp, sc) > survival_floor:
        t_hi *= 2.0
    t_lo = 0.0
    while t_hi - t_lo > 1e-3 * t_hi:
        mid = 0.5 * (t_lo + t_hi)
        if _survival_product(mid, n, is_exp, sc) > survival_floor:
            t_lo = mid
        else:
            t_hi = mid
    t_end = t_hi

    # panel edges: sorted de-duplicated breakpoints, chunked tail
    n_panels = 0
    edges[0] = 0.0
    for i in range(n):
        if is_exp[i] or sc[6 * i] <= 0.0 or sc[6 * i] >= t_end:
            continue
        j = n_panels
        while j > 0 and edges[j] > sc[6 * i]:
            j -= 1
        if edges[j] != sc[6 * i]:
            memmove(&edges[j + 2], &edges[j + 1],
                    (n_panels - j) * sizeof(double))
            edges[j + 1] = sc[6 * i]
            n_panels += 1
    gap = t_end - edges[n_panels]
    parts = <Py_ssize_t> ceil(gap * beta / 8.0)
    if parts < 1:
        parts = 1
    if parts > 16:
        parts = 16
    width = gap / parts
    for p in range(1, parts):
        edges[n_panels + p] = edges[n_panels] + p * width
    n_panels += parts
    edges[n_panels] = t_end

    for p in range(n_panels):
        _eval_panel(edges[p], edges[p + 1], n, is_exp, sc,
                    pdf, sf, &val[p * n], &err[p * n])

    # bisect the worst panel until every component meets tolerance
    while True:
        emax = 0.0
        for k in range(n):
            total = 0.0
            for p in range(n_panels):
                total += err[p * n + k]
            if total > emax:
                emax = total
        if emax <= abs_tol or n_panels >= max_panels:
            break
        worst = 0
        worst_err = -1.0
        for p in range(n_panels):
            total = 0.0
            for k in range(n):
                total += err[p * n + k]
            if total > worst_err:
                worst_err = total
                worst = p
        memmove(&edges[worst + 2], &edges[worst + 1],
                (n_panels - worst) * sizeof(double))
        edges[worst + 1] = 0.5 * (edges[worst] + edges[worst + 2])
        memmove(&val[(worst + 2) * n], &val[(worst + 1) * n],
                (n_panels - worst - 1) * n * sizeof(double))
        memmove(&err[(worst + 2) * n], &err[(worst + 1) * n],
                (n_panels - worst - 1) * n * sizeof(double))
        n_panels += 1
        _eval_panel(edges[worst], edges[worst + 1], n, is_exp, sc,
                    pdf, sf, &val[worst * n], &err[worst * n])
        _eval_panel(edges[worst + 1], edges[worst + 2], n, is_exp, sc,
                    pdf, sf, &val[(worst + 1) * n],
                    &err[(worst + 1) * n])

    converged[0] = True
    for k in range(n):
        out_p[k] = 0.0
        out_e[k] = 0.0
        for p in range(n_panels):
            out_p[k] += val[p * n + k]
            out_e[k] += err[p * n + k]
        if out_e[k] > abs_tol:
            converged[0] = False
    return n_panels


cdef double *_workspace(Py_ssize_t n, Py_ssize_t cap, bint **is_exp_out) except NULL:
    # one block: spec constants, edges, panel values/errors, node scratch
    cdef Py_ssize_t need = (6 * n) + (cap + 2) + (2 * cap * n) + (2 * n)
    cdef double *block = <double *> malloc(need * sizeof(double))
    cdef bint *is_exp = <bint *> malloc(n * sizeof(bint))
    if not (block and is_exp):
        free(block); free(is_exp)
        raise MemoryError()
    is_exp_out[0] = is_exp
    return block


cdef void _fill_spec_constants(Py_ssize_t n, cnp.uint8_t[::1] kinds_v,
                               double[::1] b_v, double[::1] tau_v,
                               bint *is_exp, double *sc):
    cdef Py_ssize_t i
    for i in range(n):
        is_exp[i] = kinds_v[i] == KIND_EXP or b_v[i] == 0.0
        sc[6 * i] = b_v[i]
        sc[6 * i + 1] = 1.0 / tau_v[i]
        sc[6 * i + 2] = b_v[i] * b_v[i] + 2.0 * b_v[i] * tau_v[i]
        if is_exp[i]:
            sc[6 * i + 3] = 0.0
            sc[6 * i + 4] = 0.0
            sc[6 * i + 5] = 0.0
        else:
            sc[6 * i + 3] = 1.0 / sc[6 * i + 2]
            sc[6 * i + 4] = 2.0 * b_v[i] / sc[6 * i + 2]
            sc[6 * i + 5] = 2.0 * b_v[i] * tau_v[i] / sc[6 * i + 2]


def win_probabilities_kernel(kinds, b, tau, double abs_tol,
                             double survival_floor, int max_panels):
    """First-to-fire probabilities; returns ``(p, err, n_panels, converged)``."""
    cdef cnp.uint8_t[::1] kinds_v = np.ascontiguousarray(kinds, dtype=np.uint8)
    cdef double[::1] b_v = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] tau_v = np.ascontiguousarray(tau, dtype=np.float64)
    cdef Py_ssize_t n = kinds_v.shape[0]
    if n == 1:
        return np.array([1.0]), np.array([0.0]), 0, True

    cdef Py_ssize_t cap = max_panels + n + 18
    cdef bint *is_exp = NULL
    cdef double *block = _workspace(n, cap, &is_exp)
    cdef double *sc = block
    cdef double *edges = sc + 6 * n
    cdef double *val = edges + cap + 2
    cdef double *err = val + cap * n
    cdef double *pdf = err + cap * n
    cdef double *sf = pdf + n

    out_p = np.empty(n)
    out_e = np.empty(n)
    cdef double[::1] out_p_v = out_p
    cdef double[::1] out_e_v = out_e
    cdef bint converged = False
    cdef Py_ssize_t n_panels

    try:
        _fill_spec_constants(n, kinds_v, b_v, tau_v, is_exp, sc)
        with nogil:
            n_panels = _quadrature(n, is_exp, sc, edges, val, err, pdf, sf,
                                   abs_tol, survival_floor, max_panels,
                                   &out_p_v[0], &out_e_v[0], &converged)
    finally:
        free(block)
        free(is_exp)

    return out_p, out_e, int(n_panels), bool(converged)


def win_probabilities_nested_kernel(kinds, b, tau, Py_ssize_t inner,
                                    double abs_tol, double survival_floor,
                                    int max_panels):
    """Win probabilities for the leading ``inner`` clocks and for the full set.

    One workspace and one pass over the spec constants serve both
    quadratures; returns ``(p_inner, err_inner, p_full, err_full,
    converged_both)``.
    """
    cdef cnp.uint8_t[::1] kinds_v = np.ascontiguousarray(kinds, dtype=np.uint8)
    cdef double[::1] b_v = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] tau_v = np.ascontiguousarray(tau, dtype=np.float64)
    cdef Py_ssize_t n = kinds_v.shape[0]
    if not 1 <= inner <= n:
        raise ValueError("inner subset size out of range")

    cdef Py_ssize_t cap = max_panels + n + 18
    cdef bint *is_exp = NULL
    cdef double *block = _workspace(n, cap, &is_exp)
    cdef double *sc = block
    cdef double *edges = sc + 6 * n
    cdef double *val = edges + cap + 2
    cdef double *err = val + cap * n
    cdef double *pdf = err + cap * n
    cdef double *sf = pdf + n

    out_pi = np.empty(inner)
    out_ei = np.empty(inner)
    out_pf = np.empty(n)
    out_ef = np.empty(n)
    cdef double[::1] out_pi_v = out_pi
    cdef double[::1] out_ei_v = out_ei
    cdef double[::1] out_pf_v = out_pf
    cdef double[::1] out_ef_v = out_ef
    cdef bint conv_inner = False, conv_full = False

    try:
        _fill_spec_constants(n, kinds_v, b_v, tau_v, is_exp, sc)
        with nogil:
            if inner == 1:
                out_pi_v[0] = 1.0
                out_ei_v[0] = 0.0
                conv_inner = True
            else:
                _quadrature(inner, is_exp, sc, edges, val, err, pdf, sf,
                            abs_tol, survival_floor, max_panels,
                            &out_pi_v[0], &out_ei_v[0], &conv_inner)
            _quadrature(n, is_exp, sc, edges, val, err, pdf, sf,
                        abs_tol, survival_floor, max_panels,
                        &out_pf_v[0], &out_ef_v[0], &conv_full)
    finally:
        free(block)
        free(is_exp)

    return out_pi, out_ei, out_pf, out_ef, bool(conv_inner and conv_full)
