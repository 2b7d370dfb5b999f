"""Constrained kinetic Monte Carlo: minimum-waiting-time event selection.

Every step draws a fresh waiting time for each currently possible outcome
(no clock carry-over between steps) and fires the earliest; pairwise
counters against the constraint matrix decide possibility.  Replicates run
on independent substreams derived from ``(seed, replicate_index)`` and are
merged by index, so results are reproducible regardless of worker count.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .asymptotics import EventModel, ModelValidationError, validate_model
from .densities import pack_specs

__all__ = ["SimConfig", "SimResult", "SimBatch", "RatioSummary",
           "run", "run_replicates", "replicate_rng"]

_SEED_MASK = (1 << 64) - 1


@dataclass
class SimConfig:
    """One simulation campaign: model, event budget, seeding, replicates."""

    model: EventModel
    sample_size: int
    seed: int = 0
    replicates: int = 1
    ratio_pairs: Optional[tuple] = None   # None -> derived from the topology
    log_events: bool = False

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.ratio_pairs is not None:
            self.ratio_pairs = tuple((str(i), str(k)) for i, k in self.ratio_pairs)
            for i, k in self.ratio_pairs:
                if i not in self.model.outcomes or k not in self.model.outcomes:
                    raise ValueError(f"ratio pair ({i!r}, {k!r}) names unknown outcomes")

    def resolved_ratio_pairs(self) -> tuple:
        """Explicit pairs, or (constrained, constraining) for single-entry models."""
        if self.ratio_pairs is not None:
            return self.ratio_pairs
        nz = np.argwhere(self.model.constraints > 0)
        if len(nz) == 1:
            i, j = (int(v) for v in nz[0])
            return ((self.model.outcomes[i], self.model.outcomes[j]),)
        return ()


@dataclass
class SimResult:
    counts: dict
    ratios: dict
    seed: int
    replicate: int
    wall_time: float
    events: Optional[np.ndarray] = None   # fired outcome per step, debug only

    def as_dict(self, include_timing: bool = True) -> dict:
        out = {
            "counts": dict(self.counts),
            "ratios": {f"{i}/{k}": _json_float(v) for (i, k), v in self.ratios.items()},
            "seed": self.seed,
            "replicate": self.replicate,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        if self.events is not None:
            out["events"] = self.events.tolist()
        return out


@dataclass(frozen=True)
class RatioSummary:
    mean: float
    stderr: Optional[float]   # None for a single replicate


@dataclass
class SimBatch:
    results: list
    summary: dict = field(default_factory=dict)   # pair -> RatioSummary

    def as_dict(self, include_timing: bool = True) -> dict:
        return {
            "results": [r.as_dict(include_timing) for r in self.results],
            "summary": {f"{i}/{k}": {"mean": _json_float(s.mean),
                                     "stderr": _json_float(s.stderr)}
                        for (i, k), s in self.summary.items()},
        }


def _json_float(v):
    if v is None or not np.isfinite(v):
        return None
    return float(v)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent substream for one replicate, derived from (seed, index)."""
    ss = np.random.SeedSequence((seed & _SEED_MASK, replicate))
    return np.random.Generator(np.random.PCG64(ss))


def run(config: SimConfig, rng: Optional[np.random.Generator] = None,
        *, kernel: str = "auto", replicate: int = 0) -> SimResult:
    """Fire exactly ``sample_size`` events; count outcomes and form ratios."""
    violations = validate_model(config.model)
    if violations:
        raise ModelValidationError(violations)
    if rng is None:
        rng = replicate_rng(config.seed, replicate)
    impl = kernels.resolve(kernel)
    kinds, b, tau = pack_specs(config.model.clocks)
    counts = np.zeros(len(kinds), dtype=np.int64)
    log = np.empty(config.sample_size, dtype=np.int32) if config.log_events else None
    t0 = time.perf_counter()
    impl.simulate_events(config.sample_size, kinds, b, tau,
                         config.model.constraints, rng, counts, log)
    wall = time.perf_counter() - t0

    names = config.model.outcomes
    count_map = {names[i]: int(counts[i]) for i in range(len(names))}
    ratios = {}
    for i, k in config.resolved_ratio_pairs():
        denom = count_map[k]
        ratios[(i, k)] = count_map[i] / denom if denom else float("nan")
    return SimResult(counts=count_map, ratios=ratios, seed=config.seed,
                     replicate=replicate, wall_time=wall, events=log)


def run_replicates(config: SimConfig, *, kernel: str = "auto",
                   workers: int = 1) -> SimBatch:
    """All replicates on their substreams; summary mean and standard error.

    ``workers > 1`` runs replicates on a thread pool (the compiled kernel
    releases the GIL); results are identical to the sequential order.
    """
    indices = range(config.replicates)
    if workers > 1 and config.replicates > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda k: run(config, kernel=kernel, replicate=k), indices))
    else:
        results = [run(config, kernel=kernel, replicate=k) for k in indices]

    summary = {}
    for pair in config.resolved_ratio_pairs():
        values = np.array([r.ratios[pair] for r in results])
        mean = float(values.mean())
        if len(values) > 1:
            stderr = float(values.std(ddof=1) / np.sqrt(len(values)))
        else:
            stderr = None
        summary[pair] = RatioSummary(mean=mean, stderr=stderr)
    return SimBatch(results=results, summary=summary)
