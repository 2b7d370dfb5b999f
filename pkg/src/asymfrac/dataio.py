"""Dataset files, synthetic reference data, and plot-ready series emission.

Datasets are CSV with a ``conc,y_mid,y_lo,y_hi`` header (optional ``#
label:`` / ``# provenance:`` comment lines) or JSON with the same fields;
points must be strictly increasing in concentration.  Two synthetic
reference datasets are bundled, generated on the fly from fitted linexp
parameter presets; they stand in for experimental branching-fraction
measurements, which ship with lab data rather than with this package.
Plot output is plain tidy CSV (``series,x,y``), one file per figure, so any
plotting tool can render it.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .densities import LINEXP
from .fitting import DataPoint, analytical_branching_fraction

__all__ = ["Dataset", "DatasetError", "load_dataset", "save_dataset",
           "generate_synthetic", "bundled_dataset", "BUNDLED_DATASETS",
           "emit_plot_data"]


class DatasetError(ValueError):
    """Malformed or invalid dataset content."""


@dataclass
class Dataset:
    label: str
    points: tuple
    provenance: str = ""

    def __post_init__(self):
        self.points = tuple(self.points)
        concs = [p.conc for p in self.points]
        if any(b <= a for a, b in zip(concs, concs[1:])):
            raise DatasetError(
                f"dataset {self.label!r} must be sorted by strictly "
                "increasing concentration")

    def concentrations(self) -> np.ndarray:
        return np.array([p.conc for p in self.points])

    def as_dict(self) -> dict:
        return {"label": self.label, "provenance": self.provenance,
                "points": [p.as_dict() for p in self.points]}


_FIELDS = ("conc", "y_mid", "y_lo", "y_hi")


def _point_from_mapping(row, where: str) -> DataPoint:
    try:
        values = {k: float(row[k]) for k in _FIELDS}
    except KeyError as exc:
        raise DatasetError(f"{where}: missing column {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: non-numeric value ({exc})") from exc
    if any(np.isnan(v) for v in values.values()):
        raise DatasetError(f"{where}: NaN value")
    try:
        return DataPoint(**values)
    except ValueError as exc:
        raise DatasetError(f"{where}: {exc}") from exc


def _load_csv(text: str, label: str) -> Dataset:
    provenance = ""
    data_lines = []
    line_numbers = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.startswith("label:"):
                label = body[len("label:"):].strip()
            elif body.startswith("provenance:"):
                provenance = body[len("provenance:"):].strip()
            continue
        data_lines.append(line)
        line_numbers.append(lineno)
    if not data_lines:
        raise DatasetError("no data rows found")
    reader = csv.DictReader(io.StringIO("\n".join(data_lines)))
    points = []
    for i, row in enumerate(reader):
        where = f"line {line_numbers[i + 1]}"
        if None in row or any(v is None for v in row.values()):
            raise DatasetError(f"{where}: wrong number of columns")
        points.append(_point_from_mapping(row, where))
    return Dataset(label=label, points=tuple(points), provenance=provenance)


def _load_json(text: str, label: str) -> Dataset:
    obj = json.loads(text)
    if isinstance(obj, list):
        points = [_point_from_mapping(p, f"point {i}") for i, p in enumerate(obj)]
        return Dataset(label=label, points=tuple(points))
    points = [_point_from_mapping(p, f"point {i}")
              for i, p in enumerate(obj.get("points", []))]
    if not points:
        raise DatasetError("no data points found")
    return Dataset(label=obj.get("label", label), points=tuple(points),
                   provenance=obj.get("provenance", ""))


def load_dataset(path) -> Dataset:
    """Read a dataset, validating every point; errors carry the line/index."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith(("{", "[")):
        return _load_json(text, label=path.stem)
    return _load_csv(text, label=path.stem)


def save_dataset(dataset: Dataset, path) -> Path:
    """Write CSV (default) or JSON depending on the file extension."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(dataset.as_dict(), indent=2) + "\n")
        return path
    lines = [f"# label: {dataset.label}"]
    if dataset.provenance:
        lines.append(f"# provenance: {dataset.provenance}")
    lines.append(",".join(_FIELDS))
    for p in dataset.points:
        lines.append(f"{p.conc!r},{p.y_mid!r},{p.y_lo!r},{p.y_hi!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def generate_synthetic(theta: dict, family: dict, concs, *,
                       noise_halfwidth: float = 0.0, jitter: bool = False,
                       seed=None, n0: int = 3, monomer_conc: float = 1.0,
                       label: str = "synthetic",
                       provenance: str = "synthetic: analytical forward model") -> Dataset:
    """Dataset whose midpoints follow the analytical branching curve.

    Interval half-widths are ``noise_halfwidth`` as a fraction of each model
    value; with ``jitter`` the midpoint moves uniformly inside its interval,
    reproducibly from ``seed``.  Zero half-width gives degenerate intervals
    equal to the model curve.
    """
    if noise_halfwidth < 0.0:
        raise ValueError("noise_halfwidth must be nonnegative")
    rng = np.random.default_rng(seed)
    points = []
    for conc in sorted(float(c) for c in concs):
        y = analytical_branching_fraction(theta, conc, family, n0, monomer_conc)
        half = noise_halfwidth * y
        mid = y + (rng.uniform(-half, half) if jitter and half > 0.0 else 0.0)
        points.append(DataPoint(conc=conc, y_mid=mid,
                                y_lo=mid - half, y_hi=mid + half))
    return Dataset(label=label, points=tuple(points), provenance=provenance)


# fitted linexp parameter presets behind the bundled reference datasets
REFERENCE_PRESETS = {
    "solution-synth": {
        "b_p": 1.74e-1, "tau_p": 9.1e-1,
        "b_r": 6.53, "tau_r": 1.31,
        "b_d": 2.28e-4, "tau_d": 3.58e-2,
    },
    "bulk-synth": {
        "b_p": 2.8e-1, "tau_p": 8.53e-1,
        "b_r": 1.58e-1, "tau_r": 11.54,
        "b_d": 1.57e-2, "tau_d": 3.43e-2,
    },
}

BUNDLED_DATASETS = tuple(sorted(REFERENCE_PRESETS))

_BUNDLED_FAMILY = {"propagation": LINEXP, "deactivation": LINEXP,
                   "backbiting": LINEXP}


def bundled_dataset(name: str) -> Dataset:
    """One of the shipped synthetic reference datasets.

    Ten log-spaced control-agent concentrations, +/-10% uncertainty
    intervals, midpoints exactly on the analytical curve of the preset
    parameters.  Clearly synthetic; replace with your own measurements for
    real fits.
    """
    if name not in REFERENCE_PRESETS:
        raise ValueError(f"unknown bundled dataset {name!r}; "
                         f"available: {', '.join(BUNDLED_DATASETS)}")
    concs = np.logspace(-2, 1, 10)
    return generate_synthetic(
        REFERENCE_PRESETS[name], _BUNDLED_FAMILY, concs,
        noise_halfwidth=0.1, jitter=False, label=name,
        provenance="synthetic: generated from bundled linexp parameter "
                   "presets; not experimental data")


def emit_plot_data(kind: str, path, **inputs) -> Path:
    """Write one figure's underlying series as tidy ``series,x,y`` CSV.

    Kinds: ``fit_curve`` (dataset intervals + model curve), ``mc_scatter``
    (per-replicate simulated ratios around an analytical level), ``timing``
    (cumulative optimizer wall time per engine).  Missing or empty inputs
    raise before any file is written.
    """
    rows = []
    if kind == "fit_curve":
        dataset = inputs.get("dataset")
        per_point = inputs.get("per_point")
        if not dataset or not getattr(dataset, "points", None):
            raise ValueError("fit_curve needs a nonempty 'dataset'")
        if not per_point:
            raise ValueError("fit_curve needs nonempty 'per_point' model values")
        for p in dataset.points:
            rows.append(("data_mid", p.conc, p.y_mid))
            rows.append(("data_lo", p.conc, p.y_lo))
            rows.append(("data_hi", p.conc, p.y_hi))
        for conc, model in per_point:
            rows.append(("model", conc, model))
    elif kind == "mc_scatter":
        analytic = inputs.get("analytic")
        ratios = inputs.get("ratios")
        series = inputs.get("series", "mc")
        if analytic is None:
            raise ValueError("mc_scatter needs the 'analytic' level")
        if not ratios:
            raise ValueError("mc_scatter needs nonempty per-replicate 'ratios'")
        for i, value in enumerate(ratios):
            rows.append(("analytic", i, analytic))
            rows.append((series, i, value))
    elif kind == "timing":
        engines = inputs.get("engines")
        if not engines:
            raise ValueError("timing needs a bench report's 'engines' mapping")
        for name, entry in engines.items():
            for i, t in enumerate(entry["cumulative_time"], start=1):
                rows.append((name, i, t))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")

    if not rows:
        raise ValueError(f"no rows to write for plot kind {kind!r}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("series", "x", "y"))
        writer.writerows(rows)
    return path
