"""Dataset files, synthetic generation, plot-series emission."""
import numpy as np
import pytest

from asymfrac.dataio import (BUNDLED_DATASETS, Dataset, DatasetError,
                             REFERENCE_PRESETS, bundled_dataset,
                             emit_plot_data, generate_synthetic, load_dataset,
                             save_dataset)
from asymfrac.fitting import DataPoint, analytical_branching_fraction

FAMILY = {"propagation": "linexp", "deactivation": "linexp",
          "backbiting": "linexp"}
THETA = dict(REFERENCE_PRESETS["solution-synth"])


def small_dataset():
    return Dataset(label="demo", provenance="unit test", points=(
        DataPoint(0.1, 0.20, 0.18, 0.22),
        DataPoint(1.0, 0.10, 0.09, 0.11),
        DataPoint(5.0, 0.05, 0.04, 0.06),
    ))


class TestLoadSave:
    @pytest.mark.parametrize("name", ["ds.csv", "ds.json"])
    def test_round_trip(self, tmp_path, name):
        original = small_dataset()
        path = save_dataset(original, tmp_path / name)
        loaded = load_dataset(path)
        assert loaded.label == original.label
        assert loaded.provenance == original.provenance
        assert loaded.points == original.points

    def test_csv_eight_points(self, tmp_path):
        rows = ["conc,y_mid,y_lo,y_hi"]
        rows += [f"{c},{0.1},{0.09},{0.11}" for c in range(1, 9)]
        path = tmp_path / "eight.csv"
        path.write_text("\n".join(rows) + "\n")
        assert len(load_dataset(path).points) == 8

    def test_inverted_interval_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("conc,y_mid,y_lo,y_hi\n"
                        "0.5,0.1,0.09,0.11\n"
                        "1.0,0.1,0.12,0.11\n")
        with pytest.raises(DatasetError, match="line 3"):
            load_dataset(path)

    def test_unsorted_concentrations_rejected(self, tmp_path):
        path = tmp_path / "unsorted.csv"
        path.write_text("conc,y_mid,y_lo,y_hi\n"
                        "2.0,0.1,0.09,0.11\n"
                        "1.0,0.1,0.09,0.11\n")
        with pytest.raises(DatasetError, match="sorted"):
            load_dataset(path)

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("conc,y_mid,y_lo,y_hi\n1.0,nan,0.09,0.11\n")
        with pytest.raises(DatasetError):
            load_dataset(path)

    def test_negative_rejected(self, tmp_path):
        path = tmp_path / "neg.json"
        path.write_text('[{"conc": -1.0, "y_mid": 0.1, "y_lo": 0.09, '
                        '"y_hi": 0.11}]')
        with pytest.raises(DatasetError, match="point 0"):
            load_dataset(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("conc,y_mid,y_lo\n1.0,0.1,0.09\n")
        with pytest.raises(DatasetError):
            load_dataset(path)


class TestSynthetic:
    def test_zero_noise_matches_analytical_curve(self):
        concs = np.logspace(-1, 1, 6)
        ds = generate_synthetic(THETA, FAMILY, concs)
        for point in ds.points:
            expected = analytical_branching_fraction(THETA, point.conc, FAMILY)
            assert point.y_mid == expected
            assert point.y_lo == point.y_mid == point.y_hi

    def test_same_seed_identical(self):
        concs = [0.1, 1.0, 10.0]
        a = generate_synthetic(THETA, FAMILY, concs, noise_halfwidth=0.1,
                               jitter=True, seed=42)
        b = generate_synthetic(THETA, FAMILY, concs, noise_halfwidth=0.1,
                               jitter=True, seed=42)
        assert a.points == b.points

    def test_jitter_keeps_truth_inside_interval(self):
        concs = np.logspace(-1, 1, 8)
        ds = generate_synthetic(THETA, FAMILY, concs, noise_halfwidth=0.15,
                                jitter=True, seed=3)
        for point in ds.points:
            truth = analytical_branching_fraction(THETA, point.conc, FAMILY)
            assert point.y_lo <= truth <= point.y_hi
            assert point.y_lo < point.y_hi

    def test_bundled_datasets(self):
        assert BUNDLED_DATASETS == ("bulk-synth", "solution-synth")
        for name in BUNDLED_DATASETS:
            ds = bundled_dataset(name)
            assert len(ds.points) == 10
            assert "synthetic" in ds.provenance
            concs = ds.concentrations()
            assert np.all(np.diff(concs) > 0)
        with pytest.raises(ValueError):
            bundled_dataset("nope")

    def test_decreasing_branching_curve(self):
        # higher control-agent concentration suppresses branching
        ds = bundled_dataset("solution-synth")
        mids = [p.y_mid for p in ds.points]
        assert mids[0] > mids[-1]


class TestEmitPlotData:
    def read_rows(self, path):
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "series,x,y"
        return [line.split(",") for line in lines[1:]]

    def test_fit_curve(self, tmp_path):
        ds = small_dataset()
        per_point = [(p.conc, p.y_mid * 0.99) for p in ds.points]
        out = emit_plot_data("fit_curve", tmp_path / "fit.csv", dataset=ds,
                             per_point=per_point)
        rows = self.read_rows(out)
        series = {r[0] for r in rows}
        assert series == {"data_mid", "data_lo", "data_hi", "model"}
        assert len(rows) == 4 * len(ds.points)

    def test_mc_scatter(self, tmp_path):
        out = emit_plot_data("mc_scatter", tmp_path / "mc.csv", analytic=0.25,
                             ratios=[0.24, 0.26, 0.25, 0.27, 0.23])
        rows = self.read_rows(out)
        assert sum(1 for r in rows if r[0] == "analytic") == 5
        assert sum(1 for r in rows if r[0] == "mc") == 5

    def test_timing(self, tmp_path):
        engines = {"analytical": {"cumulative_time": [0.1, 0.2]},
                   "monte_carlo[python]": {"cumulative_time": [1.0, 2.0]}}
        out = emit_plot_data("timing", tmp_path / "t.csv", engines=engines)
        rows = self.read_rows(out)
        assert len(rows) == 4

    def test_empty_inputs_write_nothing(self, tmp_path):
        target = tmp_path / "never.csv"
        with pytest.raises(ValueError):
            emit_plot_data("mc_scatter", target, analytic=0.25, ratios=[])
        with pytest.raises(ValueError):
            emit_plot_data("fit_curve", target, dataset=None, per_point=[])
        with pytest.raises(ValueError):
            emit_plot_data("unknown", target)
        assert not target.exists()

    def test_scatter_series_from_simulation(self, tmp_path):
        # analytic level plus a five-seed scatter for the symmetric
        # two-outcome process at its closed-form ratio 0.25
        from asymfrac.densities import exponential
        from asymfrac.asymptotics import single_constraint_model
        from asymfrac.simulator import SimConfig, run
        model = single_constraint_model(exponential(1.0), exponential(1.0),
                                        n0=3)
        ratios = [run(SimConfig(model=model, sample_size=10**4,
                                seed=s)).ratios[("constrained", "free")]
                  for s in range(5)]
        out = emit_plot_data("mc_scatter", tmp_path / "fig.csv",
                             analytic=0.25, ratios=ratios)
        rows = self.read_rows(out)
        assert len(rows) == 10
        mc_values = [float(r[2]) for r in rows if r[0] == "mc"]
        assert all(abs(v - 0.25) < 0.05 for v in mc_values)
