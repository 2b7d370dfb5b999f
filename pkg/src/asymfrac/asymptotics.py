"""Analytical asymptotic event fractions for constrained processes.

A process is well posed when no outcome is constrained by itself and at
least one outcome is always free to fire.  Closed-form solving is offered
for the two topologies with exactly one nonzero constraint entry:

* two outcomes, the second requiring ``n0`` firings of the first since its
  own last firing (``solve_single_constraint``);
* three outcomes -- propagation, deactivation, backbiting -- where only
  backbiting is constrained, by ``n0`` propagations
  (``solve_crp``, the controlled-radical-polymerization kinetic model).

Both reduce the asymptotics to first-to-fire probabilities of the active
clock subsets.  Writing ``q`` for the probability that the constraining
outcome beats the other free clocks while the constrained outcome is
blocked, and ``rho_i`` for the full-set win probabilities, the constrained
outcome's asymptotic share is ``q rho_c / (q + n0 rho_c)``; the blocked
subset hosts ``n0/q`` events per constrained firing.  Every other topology
is routed to the simulator (complex dependency structures need not converge
to fixed ratios).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import DensitySpec, pack_specs
from .winprob import (win_probabilities_exponential, win_probabilities_nested,
                      win_probabilities_packed)

__all__ = [
    "EventModel", "AsymptoticResult", "ModelViolation", "ModelValidationError",
    "ModelDegeneracyError", "UnsupportedTopologyError", "validate_model",
    "solve_single_constraint", "solve_crp", "solve_model",
    "single_constraint_ratio", "crp_branching_fraction",
]

#: default propagations required before a backbiting can occur
DEFAULT_N0 = 3

#: a win probability at or below this is indistinguishable from zero at
#: quadrature tolerance; formulas dividing by it are treated as degenerate
DEGENERACY_EPS = 1e-12

CRP_OUTCOMES = ("propagation", "deactivation", "backbiting")


class ModelDegeneracyError(ArithmeticError):
    """A win probability the solution divides by is numerically zero."""


class UnsupportedTopologyError(ValueError):
    """Constraint structure has no closed form here; use the simulator."""


@dataclass(frozen=True)
class ModelViolation:
    kind: str           # "self_constraint" | "no_free_outcome"
    where: tuple        # offending (i, j) entry, or () for global conditions
    message: str


class ModelValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


@dataclass
class EventModel:
    """Named outcomes, pairwise occurrence constraints, one clock each.

    ``constraints[i][j] = c`` means outcome ``i`` may fire only after at
    least ``c`` firings of outcome ``j`` since ``i`` itself last fired.
    """

    outcomes: tuple
    constraints: np.ndarray
    clocks: tuple

    def __post_init__(self):
        self.outcomes = tuple(str(o) for o in self.outcomes)
        self.clocks = tuple(self.clocks)
        self.constraints = np.asarray(self.constraints, dtype=np.int64)
        n = len(self.outcomes)
        if len(set(self.outcomes)) != n:
            raise ValueError("outcome names must be unique")
        if self.constraints.shape != (n, n):
            raise ValueError(f"constraint matrix must be {n}x{n}, "
                             f"got {self.constraints.shape}")
        if np.any(self.constraints < 0):
            raise ValueError("constraint entries must be nonnegative")
        if len(self.clocks) != n:
            raise ValueError("need exactly one clock per outcome")
        for c in self.clocks:
            if not isinstance(c, DensitySpec):
                raise ValueError(f"clock {c!r} is not a DensitySpec")

    def index(self, name: str) -> int:
        return self.outcomes.index(name)

    def as_dict(self) -> dict:
        return {
            "outcomes": list(self.outcomes),
            "constraints": self.constraints.tolist(),
            "clocks": [c.as_dict() for c in self.clocks],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EventModel":
        try:
            outcomes = obj["outcomes"]
            constraints = obj["constraints"]
            clocks = [DensitySpec.from_dict(c) for c in obj["clocks"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(
                "event model needs 'outcomes', 'constraints' and 'clocks'") from exc
        return cls(outcomes=tuple(outcomes), constraints=constraints,
                   clocks=tuple(clocks))


def crp_model(prop: DensitySpec, deact: DensitySpec, back: DensitySpec,
              n0: int = DEFAULT_N0) -> EventModel:
    """Three-outcome kinetic model: backbiting needs ``n0`` prior propagations."""
    constraints = np.zeros((3, 3), dtype=np.int64)
    constraints[2, 0] = n0
    return EventModel(outcomes=CRP_OUTCOMES, constraints=constraints,
                      clocks=(prop, deact, back))


def single_constraint_model(free_clock: DensitySpec, constrained_clock: DensitySpec,
                            n0: int = DEFAULT_N0,
                            outcomes=("free", "constrained")) -> EventModel:
    constraints = np.zeros((2, 2), dtype=np.int64)
    constraints[1, 0] = n0
    return EventModel(outcomes=tuple(outcomes), constraints=constraints,
                      clocks=(free_clock, constrained_clock))


def validate_model(model: EventModel) -> list[ModelViolation]:
    """Well-posedness check; an empty list means the model can evolve."""
    violations = []
    c = model.constraints
    for i in range(len(model.outcomes)):
        if c[i, i] != 0:
            violations.append(ModelViolation(
                kind="self_constraint", where=(i, i),
                message=f"outcome {model.outcomes[i]!r} is constrained by itself "
                        f"(entry ({i}, {i}) = {int(c[i, i])})"))
    if not np.any(np.all(c == 0, axis=1)):
        violations.append(ModelViolation(
            kind="no_free_outcome", where=(),
            message="no outcome is free to occur (every row has a nonzero "
                    "constraint), so no event is ever possible"))
    return violations


@dataclass(frozen=True)
class AsymptoticResult:
    """Asymptotic per-outcome event fractions and requested pairwise ratios."""

    outcomes: tuple
    fractions: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)

    def fraction(self, name: str) -> float:
        return self.fractions[name]

    def ratio(self, numerator: str, denominator: str) -> float:
        key = (numerator, denominator)
        if key in self.ratios:
            return self.ratios[key]
        return self.fractions[numerator] / self.fractions[denominator]

    def as_dict(self) -> dict:
        return {
            "outcomes": list(self.outcomes),
            "fractions": dict(self.fractions),
            "ratios": {f"{i}/{k}": v for (i, k), v in self.ratios.items()},
        }


def _check_n0(n0) -> int:
    if int(n0) != n0 or n0 < 0:
        raise ValueError(f"n0 must be a nonnegative integer, got {n0!r}")
    return int(n0)


def _win_probs(specs) -> np.ndarray:
    """Closed form when every clock is exactly exponential, else quadrature."""
    if all(s.is_exponential for s in specs):
        return win_probabilities_exponential([1.0 / s.tau for s in specs])
    return win_probabilities_packed(*pack_specs(specs))


def _single_constraint_probs(free_clock, constrained_clock) -> tuple:
    p = _win_probs((free_clock, constrained_clock))
    return float(p[0]), float(p[1])


def single_constraint_ratio(free_clock: DensitySpec,
                            constrained_clock: DensitySpec,
                            n0: int = DEFAULT_N0) -> float:
    """Asymptotic constrained-to-free count ratio, ``P2/(P1 + n0 P2)``."""
    n0 = _check_n0(n0)
    p_free, p_cons = _single_constraint_probs(free_clock, constrained_clock)
    denom = p_free + n0 * p_cons
    if denom <= DEGENERACY_EPS:
        raise ModelDegeneracyError(
            "free outcome never wins; the constrained-to-free ratio diverges")
    return p_cons / denom


def solve_single_constraint(free_clock: DensitySpec,
                            constrained_clock: DensitySpec,
                            n0: int = DEFAULT_N0,
                            outcomes=("free", "constrained")) -> AsymptoticResult:
    """Two-outcome process where the second needs ``n0`` firings of the first.

    With ``P1 = P(T_free < T_cons)`` and ``P2`` its complement, the
    asymptotic fractions are ``(P1 + n0 P2)/(1 + n0 P2)`` and
    ``P2/(1 + n0 P2)``, so the constrained-to-free ratio is
    ``P2/(P1 + n0 P2)``.
    """
    n0 = _check_n0(n0)
    p_free, p_cons = _single_constraint_probs(free_clock, constrained_clock)
    denom = 1.0 + n0 * p_cons
    f_free = (p_free + n0 * p_cons) / denom
    f_cons = p_cons / denom
    name_f, name_c = outcomes
    if f_free <= DEGENERACY_EPS:
        raise ModelDegeneracyError(
            f"free outcome {name_f!r} never wins; ratio to it is undefined")
    return AsymptoticResult(
        outcomes=tuple(outcomes),
        fractions={name_f: f_free, name_c: f_cons},
        ratios={(name_c, name_f): f_cons / f_free},
    )


def _crp_probabilities(prop, deact, back) -> tuple:
    """(q, rho_p, rho_b): the pair and triple win probabilities that the
    balance equations need.  Packs the clock arrays once; the pair set is
    the leading slice of the triple set."""
    specs = (prop, deact, back)
    if all(s.is_exponential for s in specs):
        rates = np.array([1.0 / s.tau for s in specs])
        pair = win_probabilities_exponential(rates[:2])
        triple = rates / rates.sum()
    else:
        pair, triple = win_probabilities_nested(*pack_specs(specs), 2)
    return float(pair[0]), float(triple[0]), float(triple[2])


def crp_branching_fraction(prop: DensitySpec, deact: DensitySpec,
                           back: DensitySpec, n0: int = DEFAULT_N0) -> float:
    """Asymptotic backbiting-to-propagation count ratio.

    Equal to ``solve_crp(...).ratio("backbiting", "propagation")`` without
    building the full result.
    """
    n0 = _check_n0(n0)
    q, rho_p, rho_b = _crp_probabilities(prop, deact, back)
    if q <= DEGENERACY_EPS:
        raise ModelDegeneracyError(
            "propagation never beats deactivation; the blocked-backbiting "
            "subset never terminates and asymptotic fractions are undefined")
    return rho_b / (rho_p + n0 * rho_b)


def solve_crp(prop: DensitySpec, deact: DensitySpec, back: DensitySpec,
              n0: int = DEFAULT_N0) -> AsymptoticResult:
    """Branching asymptotics of the three-event kinetic model.

    Needs the pair probabilities with backbiting blocked and the triple
    probabilities with all clocks active.  Events with backbiting blocked
    number ``n0 n_back / P(T_prop < T_deact)``; solving the balance gives

        f_back = q rho_b / (q + n0 rho_b)
        f_prop = q (rho_p + n0 rho_b) / (q + n0 rho_b)

    with ``q = P(T_prop < T_deact)`` and ``rho`` the all-clocks win
    probabilities; the deactivation share is the complement and the
    branching fraction is ``f_back / f_prop``.
    """
    n0 = _check_n0(n0)
    q, rho_p, rho_b = _crp_probabilities(prop, deact, back)
    if q <= DEGENERACY_EPS:
        raise ModelDegeneracyError(
            "propagation never beats deactivation; the blocked-backbiting "
            "subset never terminates and asymptotic fractions are undefined")
    denom = q + n0 * rho_b
    f_back = q * rho_b / denom
    f_prop = q * (rho_p + n0 * rho_b) / denom
    f_deact = 1.0 - f_back - f_prop
    name_p, name_d, name_b = CRP_OUTCOMES
    return AsymptoticResult(
        outcomes=CRP_OUTCOMES,
        fractions={name_p: f_prop, name_d: f_deact, name_b: f_back},
        ratios={(name_b, name_p): rho_b / (rho_p + n0 * rho_b)},
    )


def solve_model(model: EventModel) -> AsymptoticResult:
    """Dispatch a generic model to the matching closed-form solver.

    Only topologies with exactly one nonzero constraint entry and two or
    three outcomes are solvable here; anything else raises
    ``UnsupportedTopologyError`` and belongs to the simulator.
    """
    violations = validate_model(model)
    if violations:
        raise ModelValidationError(violations)
    nz = np.argwhere(model.constraints > 0)
    if len(nz) != 1:
        raise UnsupportedTopologyError(
            f"{len(nz)} nonzero constraint entries; closed forms cover only "
            "single-entry topologies -- run the simulator instead")
    ci, cj = (int(v) for v in nz[0])
    n0 = int(model.constraints[ci, cj])
    names = model.outcomes
    if len(names) == 2:
        result = solve_single_constraint(
            model.clocks[cj], model.clocks[ci], n0,
            outcomes=(names[cj], names[ci]))
    elif len(names) == 3:
        other = next(k for k in range(3) if k not in (ci, cj))
        inner = solve_crp(model.clocks[cj], model.clocks[other],
                          model.clocks[ci], n0)
        mapping = {CRP_OUTCOMES[0]: names[cj], CRP_OUTCOMES[1]: names[other],
                   CRP_OUTCOMES[2]: names[ci]}
        result = AsymptoticResult(
            outcomes=names,
            fractions={mapping[k]: v for k, v in inner.fractions.items()},
            ratios={(mapping[i], mapping[k]): v
                    for (i, k), v in inner.ratios.items()},
        )
    else:
        raise UnsupportedTopologyError(
            f"{len(names)}-outcome models have no closed form here -- "
            "run the simulator instead")
    return result
