"""Probability that one clock among independent competitors fires first.

For clocks ``T_1..T_N`` with densities ``f_k`` and CDFs ``F_k``, the chance
that clock ``k`` realizes the minimum is::

    p_k = integral_0^inf f_k(t) * prod_{j != k} (1 - F_j(t)) dt

computed by adaptive Gauss-Kronrod quadrature with panels split at every
linexp breakpoint (the integrand has slope kinks there) and the domain
truncated where the joint survival product falls below a floor.  For
all-exponential clock sets the closed form ``p_k = rate_k / sum(rates)`` is
available separately and exactly.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels
from .densities import DensitySpec, pack_specs

__all__ = ["QuadratureError", "win_probabilities",
           "win_probabilities_exponential", "win_probabilities_packed",
           "win_probabilities_nested"]

#: per-component absolute quadrature tolerance
ABS_TOL = 1e-10
#: integration stops where prod_j (1 - F_j) drops below this
SURVIVAL_FLOOR = 1e-14
#: refinement budget
MAX_PANELS = 512


class QuadratureError(ArithmeticError):
    """Quadrature did not reach tolerance within its subdivision budget."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


def win_probabilities_packed(kinds, b, tau, *, abs_tol: float = ABS_TOL,
                             survival_floor: float = SURVIVAL_FLOOR,
                             max_panels: int = MAX_PANELS,
                             kernel: str = "auto") -> np.ndarray:
    """Quadrature on already-packed clock arrays (see ``pack_specs``)."""
    if len(kinds) == 1:
        return np.array([1.0])
    impl = kernels.resolve(kernel)
    p, err, _, converged = impl.win_probabilities_kernel(
        kinds, b, tau, abs_tol, survival_floor, max_panels)
    if not converged:
        raise QuadratureError("win-probability quadrature did not converge",
                              float(np.max(err)))
    total = math.fsum(p.tolist())
    if abs(total - 1.0) > 1e-8:
        raise QuadratureError(
            f"win probabilities sum to {total!r}, off by more than 1e-8",
            abs(total - 1.0))
    p /= total
    return p


def win_probabilities_nested(kinds, b, tau, inner: int, *,
                             abs_tol: float = ABS_TOL,
                             survival_floor: float = SURVIVAL_FLOOR,
                             max_panels: int = MAX_PANELS,
                             kernel: str = "auto") -> tuple:
    """Win probabilities of the leading-``inner`` subset and the full set.

    Single-constraint processes alternate between exactly these two active
    clock sets (constrained clock blocked vs everything live), so both
    quadratures run off one packed description.
    """
    impl = kernels.resolve(kernel)
    p_in, err_in, p_full, err_full, converged = \
        impl.win_probabilities_nested_kernel(kinds, b, tau, inner, abs_tol,
                                             survival_floor, max_panels)
    if not converged:
        worst = max(float(np.max(err_in)), float(np.max(err_full)))
        raise QuadratureError("win-probability quadrature did not converge",
                              worst)
    for p in (p_in, p_full):
        total = math.fsum(p.tolist())
        if abs(total - 1.0) > 1e-8:
            raise QuadratureError(
                f"win probabilities sum to {total!r}, off by more than 1e-8",
                abs(total - 1.0))
        p /= total
    return p_in, p_full


def win_probabilities(clocks: Sequence[DensitySpec], *, abs_tol: float = ABS_TOL,
                      survival_floor: float = SURVIVAL_FLOOR,
                      max_panels: int = MAX_PANELS,
                      kernel: str = "auto") -> np.ndarray:
    """First-to-fire probability for each clock in the set.

    The result sums to one (checked to 1e-8, then renormalized exactly so
    downstream ratio formulas see no drift).  Raises ``QuadratureError``
    when the tolerance cannot be met.
    """
    if len(clocks) == 0:
        raise ValueError("clock set must be nonempty")
    if len(clocks) == 1:
        return np.array([1.0])
    kinds, b, tau = pack_specs(clocks)
    return win_probabilities_packed(kinds, b, tau, abs_tol=abs_tol,
                                    survival_floor=survival_floor,
                                    max_panels=max_panels, kernel=kernel)


def win_probabilities_exponential(rates) -> np.ndarray:
    """Closed form for all-exponential clocks: each rate over the rate sum."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise ValueError("rate vector must be nonempty")
    if np.any(rates <= 0.0) or not np.all(np.isfinite(rates)):
        raise ValueError("rates must be positive and finite")
    return rates / rates.sum()
