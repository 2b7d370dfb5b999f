"""Inter-event waiting-time densities: evaluation, integration, exact sampling.

Two families are supported. ``exp`` is the standard exponential with mean
``tau``. ``linexp`` rises linearly on ``[0, b)`` and decays exponentially
with scale ``tau`` past the breakpoint::

    f(t) = 2 t / A                      for 0 <= t < b
    f(t) = (2 b / A) exp(-(t - b)/tau)  for t >= b,       A = b^2 + 2 b tau

The density is continuous at ``t = b`` and integrates to one: the linear
branch carries mass ``b^2/A = b/(b + 2 tau)`` and the tail carries
``2 b tau / A = 2 tau/(b + 2 tau)``.  Integrating each branch gives the
closed-form CDF used throughout::

    F(t) = t^2 / A                            for t < b
    F(t) = 1 - (2 b tau / A) exp(-(t - b)/tau) for t >= b

(The unit tests re-verify this against direct numerical quadrature of the
density.)  Sampling is by inverse transform, solving F(t) = u on the
quadratic branch for u < F(b) and on the logarithmic branch otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXP = "exp"
LINEXP = "linexp"

#: at or below this breakpoint a linexp spec is treated exactly as an
#: exponential (the analytic limit), avoiding 0/0 in the branch prefactors
B_DEGENERATE = 1e-12


@dataclass(frozen=True)
class DensitySpec:
    """Immutable description of one waiting-time density.

    ``b`` is the linexp breakpoint (ignored for ``exp``, where it must be
    zero); ``tau`` is the exponential tail scale and, for ``exp``, the mean.
    Instances are freely shareable across threads; sampling takes a
    caller-owned random stream.
    """

    kind: str
    tau: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in (EXP, LINEXP):
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not (self.tau > 0.0) or not math.isfinite(self.tau):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if self.b < 0.0 or not math.isfinite(self.b):
            raise ValueError(f"b must be nonnegative and finite, got {self.b}")
        if self.kind == EXP and self.b != 0.0:
            raise ValueError("exponential density takes no breakpoint; b must be 0")

    @property
    def is_exponential(self) -> bool:
        """True when the spec behaves exactly as Exponential(tau)."""
        return self.kind == EXP or self.b <= B_DEGENERATE

    def as_dict(self) -> dict:
        return {"kind": self.kind, "b": self.b, "tau": self.tau}

    @classmethod
    def from_dict(cls, obj: dict) -> "DensitySpec":
        try:
            kind = obj["kind"]
            tau = float(obj["tau"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"density spec needs 'kind' and 'tau': {obj!r}") from exc
        b = float(obj.get("b", 0.0))
        return cls(kind=kind, tau=tau, b=b)


def exponential(tau: float) -> DensitySpec:
    return DensitySpec(kind=EXP, tau=tau)


def linear_exponential(b: float, tau: float) -> DensitySpec:
    """Linexp spec; a zero breakpoint degenerates exactly to Exponential(tau)."""
    return DensitySpec(kind=LINEXP, tau=tau, b=b)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("time must be nonnegative")
    return t


def density(spec: DensitySpec, t):
    """Probability density at time ``t`` (scalar or array)."""
    t = _check_time(t)
    if spec.is_exponential:
        out = np.exp(-t / spec.tau) / spec.tau
    else:
        b, tau = spec.b, spec.tau
        a = b * b + 2.0 * b * tau
        out = np.where(t < b,
                       2.0 * t / a,
                       (2.0 * b / a) * np.exp(-(np.maximum(t, b) - b) / tau))
    return out if out.ndim else float(out)


def cdf(spec: DensitySpec, t):
    """Cumulative probability F(t) (scalar or array)."""
    t = _check_time(t)
    if spec.is_exponential:
        out = -np.expm1(-t / spec.tau)
    else:
        b, tau = spec.b, spec.tau
        a = b * b + 2.0 * b * tau
        out = np.where(t < b,
                       t * t / a,
                       1.0 - (2.0 * b * tau / a) * np.exp(-(np.maximum(t, b) - b) / tau))
    return out if out.ndim else float(out)


def survival(spec: DensitySpec, t):
    """Tail probability 1 - F(t), computed without cancellation on the tail."""
    t = _check_time(t)
    if spec.is_exponential:
        out = np.exp(-t / spec.tau)
    else:
        b, tau = spec.b, spec.tau
        a = b * b + 2.0 * b * tau
        out = np.where(t < b,
                       1.0 - t * t / a,
                       (2.0 * b * tau / a) * np.exp(-(np.maximum(t, b) - b) / tau))
    return out if out.ndim else float(out)


def inverse_cdf(spec: DensitySpec, u):
    """Solve F(t) = u for t, piecewise (quadratic branch below F(b)).

    ``u`` must lie in [0, 1); accepts scalars or arrays.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u >= 1.0)):
        raise ValueError("u must lie in [0, 1)")
    if spec.is_exponential:
        out = -spec.tau * np.log1p(-u)
    else:
        b, tau = spec.b, spec.tau
        a = b * b + 2.0 * b * tau
        fb = b / (b + 2.0 * tau)
        # quadratic branch: t = sqrt(u A); log branch: 1-F inverted on the tail
        quad = np.sqrt(u * a)
        logb = b - tau * np.log((1.0 - u) * a / (2.0 * b * tau))
        out = np.where(u < fb, quad, logb)
    return out if out.ndim else float(out)


def sample(spec: DensitySpec, rng: np.random.Generator, size=None):
    """Draw from the density by inverse transform on ``rng`` uniforms.

    One uniform is consumed per draw.  ``size=None`` returns a scalar.
    """
    return inverse_cdf(spec, rng.random(size))


# integer codes shared with the simulation/quadrature kernels
KIND_EXP_CODE = 0
KIND_LINEXP_CODE = 1


def pack_specs(specs):
    """Kernel-ready arrays (kind codes, breakpoints, tail scales).

    Degenerate breakpoints pack as exponentials with ``b = 0``, which is the
    form the kernels branch on.
    """
    kinds, b, tau = [], [], []
    for s in specs:
        degenerate = s.is_exponential
        kinds.append(KIND_EXP_CODE if degenerate else KIND_LINEXP_CODE)
        b.append(0.0 if degenerate else s.b)
        tau.append(s.tau)
    return (np.array(kinds, dtype=np.uint8), np.array(b, dtype=float),
            np.array(tau, dtype=float))
