import csv

import numpy as np
import pytest

from radsurro.evalbench import (
    EvalError,
    emit_plot_data,
    relative_error,
    wall_segments,
)

from conftest import DESK_MESH, TABLE1_MESH


class TestWallSegments:
    def test_table1_boundaries(self):
        segs = wall_segments(TABLE1_MESH)
        assert segs["south"] == range(0, 120)
        assert segs["east"] == range(120, 140)
        assert segs["north"] == range(140, 260)
        assert segs["west"] == range(260, 280)

    def test_desk_boundaries(self):
        segs = wall_segments(DESK_MESH)
        assert segs["south"] == range(0, 30)
        assert segs["east"] == range(30, 40)
        assert segs["north"] == range(40, 70)
        assert segs["west"] == range(70, 80)


class TestRelativeError:
    def test_exact_prediction_is_zero(self):
        ref = np.full((3, 80), 1e5)
        rep = relative_error(ref.copy(), ref, DESK_MESH)
        assert rep.mean == 0.0
        assert rep.std == 0.0
        assert np.all(rep.per_point == 0.0)

    def test_uniform_ten_percent(self):
        ref = np.full((4, 80), 2e5)
        rep = relative_error(1.1 * ref, ref, DESK_MESH)
        assert rep.mean == pytest.approx(0.10, rel=1e-12)
        assert rep.std == pytest.approx(0.0, abs=1e-15)
        assert rep.per_wall["east"]["mean"] == pytest.approx(0.10, rel=1e-12)

    def test_known_mean_and_population_std(self):
        # half the points at 10% error, half at 20%: mean 15%, std 5%
        ref = np.full((1, 80), 1e5)
        pred = ref.copy()
        pred[0, :40] *= 1.10
        pred[0, 40:] *= 1.20
        rep = relative_error(pred, ref, DESK_MESH)
        assert rep.mean == pytest.approx(0.15, rel=1e-12)
        assert rep.std == pytest.approx(0.05, rel=1e-12)

    def test_global_mean_is_point_weighted_wall_mean(self):
        rng = np.random.default_rng(3)
        ref = rng.uniform(1e4, 4e5, (5, 80))
        pred = ref * rng.uniform(0.8, 1.2, ref.shape)
        rep = relative_error(pred, ref, DESK_MESH)
        weighted = sum(len(r) * rep.per_wall[w]["mean"]
                       for w, r in wall_segments(DESK_MESH).items())
        assert weighted / DESK_MESH.n_boundary == pytest.approx(rep.mean, rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        ref = rng.uniform(1e4, 4e5, (3, 80))
        pred = ref * rng.uniform(0.9, 1.1, ref.shape)
        a = relative_error(pred, ref, DESK_MESH)
        b = relative_error(1e3 * pred, 1e3 * ref, DESK_MESH)
        assert np.max(np.abs(a.per_point - b.per_point)) < 1e-12

    def test_sample_axis_mean_before_point_aggregation(self):
        ref = np.full((2, 80), 1e5)
        pred = ref.copy()
        pred[0] *= 1.2  # first sample 20% high, second exact
        rep = relative_error(pred, ref, DESK_MESH)
        assert np.allclose(rep.per_point, 0.10)

    def test_nonpositive_reference_rejected(self):
        ref = np.full((1, 80), 1e5)
        ref[0, 5] = 0.0
        with pytest.raises(EvalError):
            relative_error(ref, ref, DESK_MESH)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(EvalError):
            relative_error(np.ones((2, 80)), np.ones((3, 80)), DESK_MESH)

    def test_json_report_is_in_percent(self):
        ref = np.full((1, 80), 1e5)
        rep = relative_error(1.05 * ref, ref, DESK_MESH, dataset_id="d", model_id="m")
        j = rep.to_json()
        assert j["mean_percent"] == pytest.approx(5.0, rel=1e-6)
        assert len(j["per_point_percent"]) == 80
        assert j["dataset_id"] == "d" and j["model_id"] == "m"


class TestEmitPlotData:
    def test_curve_and_markers(self, tmp_path):
        rng = np.random.default_rng(1)
        ref = rng.uniform(1e4, 4e5, (2, 280))
        rep = relative_error(ref * 1.02, ref, TABLE1_MESH)
        curve, markers = tmp_path / "curve.csv", tmp_path / "markers.csv"
        emit_plot_data(rep, TABLE1_MESH, curve, markers)

        with open(curve, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["index", "wall", "mean_relative_error_percent"]
        assert len(rows) == 281
        assert rows[1][1] == "south"
        assert rows[121][1] == "east"
        # values round-trip to the stored per-point errors at f32 precision
        got = np.array([float(r[2]) for r in rows[1:]]) / 100.0
        assert np.max(np.abs(got - rep.per_point)) < 1e-6 * rep.per_point.max()

        with open(markers, newline="") as f:
            mrows = list(csv.reader(f))
        assert len(mrows) == 4
        assert [int(r[0]) for r in mrows[1:]] == [120, 140, 260]

    def test_empty_report_rejected(self, tmp_path):
        rep = relative_error(np.ones((1, 80)), np.ones((1, 80)), DESK_MESH)
        rep.per_point = np.empty(0)
        with pytest.raises(EvalError):
            emit_plot_data(rep, DESK_MESH, tmp_path / "c.csv", tmp_path / "m.csv")
