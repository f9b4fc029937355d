import numpy as np
import pandas as pd
import pytest

from analysis.metrics import (
    DisplacementCurve,
    InsertionFrame,
    InsertionRecord,
    RunMetrics,
    Slab,
    average_records,
    com_displacement,
    mean_structure_displacement,
    mismatch_score,
    penetration_depth,
    slab_average_displacement,
    structure_heatmap,
)
from exceptions import MeasurementError

X = np.array([1.0, 0.0, 0.0])


def _slab(center=0.0314, half_width=0.001):
    return Slab(origin=np.zeros(3), axis=X, center=center, half_width=half_width)


def _record(values, names=("a",)):
    frames = [
        InsertionFrame(time=float(k), depth=0.001 * k, slab_avg_disp=v, com_disp=v / 2,
                       per_structure_disp={n: v * (i + 1) for i, n in enumerate(names)})
        for k, v in enumerate(values)
    ]
    return InsertionRecord(frames, list(names))


# =============================================================================
# DEPTH / SLAB / CENTRE OF MASS
# =============================================================================

def test_penetration_depth():
    assert penetration_depth([1, 2, 3], [1, 2, 3]) == 0.0
    assert penetration_depth([0, 0, 0], [0, 0, 0.0314]) == pytest.approx(0.0314)
    assert penetration_depth([0, 0, 0], [0.003, 0.004, 0]) == pytest.approx(0.005)


def test_slab_average_of_static_scene_is_zero():
    rest = np.array([[0.0314, 0.0, 0.0], [0.0314, 0.001, 0.0]])
    assert slab_average_displacement(rest.copy(), rest, _slab()) == 0.0


def test_slab_average_of_uniform_translation():
    rest = np.array([[0.0314, 0.0, 0.0], [0.0314, 0.001, 0.0], [0.0, 0.0, 0.0]])
    current = rest + np.array([0.0, 0.0, 0.001])
    current[2] += 5.0  # outside the slab
    assert slab_average_displacement(current, rest, _slab()) == pytest.approx(0.001)


def test_slab_average_is_the_mean_magnitude():
    rest = np.array([[0.0314, 0.0, 0.0], [0.0314, 0.002, 0.0], [0.0314, 0.004, 0.0]])
    current = rest + np.array([[0.0, 0.0, 0.001], [0.0, 0.0, -0.002], [0.003, 0.0, 0.0]])
    assert slab_average_displacement(current, rest, _slab(half_width=0.01)) == pytest.approx(0.002)


def test_slab_selects_by_rest_position():
    rest = np.array([[0.0314, 0.0, 0.0], [0.04, 0.0, 0.0]])
    current = np.array([[0.05, 0.0, 0.0], [0.0314, 0.0, 0.0]])
    assert slab_average_displacement(current, rest, _slab()) == pytest.approx(0.05 - 0.0314)


def test_empty_slab_raises():
    rest = np.array([[0.0, 0.0, 0.0]])
    with pytest.raises(MeasurementError, match="selects no particles"):
        slab_average_displacement(rest, rest, _slab())


def test_com_displacement_examples():
    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert com_displacement(rest, rest) == 0.0
    t = np.array([0.3, -0.4, 0.0])
    assert com_displacement(rest + t, rest) == pytest.approx(0.5)
    d = np.array([0.2, 0.0, 0.0])
    assert com_displacement(rest + np.array([d, -d]), rest) == pytest.approx(0.0)


def test_com_displacement_of_subset():
    rest = np.zeros((3, 3))
    current = np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 0]])
    assert com_displacement(current, rest, [0]) == pytest.approx(1.0)
    assert com_displacement(current, rest, [1, 2]) == 0.0
    with pytest.raises(MeasurementError):
        com_displacement(current, rest, [])


def test_metrics_are_translation_invariant(rng):
    rest = rng.uniform(0.0, 0.05, size=(200, 3))
    current = rest + rng.normal(scale=0.001, size=rest.shape)
    slab = Slab(origin=np.zeros(3), axis=X, center=0.025, half_width=0.005)
    subset = np.arange(0, 200, 3)
    base = (
        slab_average_displacement(current, rest, slab),
        com_displacement(current, rest),
        com_displacement(current, rest, subset),
        penetration_depth(rest[0], current[0]),
    )
    for _ in range(100):
        t = rng.normal(scale=1.0, size=3)
        moved = Slab(origin=t, axis=X, center=0.025, half_width=0.005)
        shifted = (
            slab_average_displacement(current + t, rest + t, moved),
            com_displacement(current + t, rest + t),
            com_displacement(current + t, rest + t, subset),
            penetration_depth(rest[0] + t, current[0] + t),
        )
        assert shifted == pytest.approx(base, rel=1e-6, abs=1e-12)


def test_metrics_are_non_negative(rng):
    rest = rng.normal(size=(50, 3))
    current = rest + rng.normal(scale=0.1, size=rest.shape)
    assert com_displacement(current, rest) >= 0
    assert slab_average_displacement(current, rest, Slab(np.zeros(3), X, 0.0, 10.0)) >= 0


# =============================================================================
# RECORDS
# =============================================================================

def test_record_dataframe_columns():
    df = _record([0.0, 1.0, 2.0], names=("caudate", "thalamus")).to_dataframe()
    assert list(df.columns) == ["time", "depth", "slab_avg_disp", "com_disp", "caudate", "thalamus"]
    assert df["thalamus"].tolist() == [0.0, 2.0, 4.0]


def test_record_dataframe_roundtrip():
    record = _record([0.0, 1.0, 2.0], names=("caudate",))
    back = InsertionRecord.from_dataframe(record.to_dataframe())
    assert back.structure_names == ["caudate"]
    assert back.column("slab_avg_disp").tolist() == [0.0, 1.0, 2.0]


def test_record_times_must_increase():
    record = _record([0.0, 1.0])
    record.frames[1].time = 0.0
    with pytest.raises(MeasurementError):
        record.validate()


def test_average_records_is_frame_wise_mean():
    avg = average_records([_record([0.0, 2.0]), _record([2.0, 4.0])])
    assert avg.column("slab_avg_disp").tolist() == [1.0, 3.0]
    assert avg.column("a").tolist() == [1.0, 3.0]


def test_average_records_truncates_to_shortest():
    avg = average_records([_record([0.0, 2.0, 4.0]), _record([2.0, 4.0])])
    assert len(avg) == 2


def test_structure_heatmap_and_mean():
    records = [_record([1.0, 3.0], names=("x", "y"))]
    heat = structure_heatmap(records)
    assert list(heat.columns) == ["x", "y"]
    assert heat.index.name == "depth"
    assert mean_structure_displacement(records) == pytest.approx(np.mean([1.0, 3.0, 2.0, 6.0]))


def test_run_metrics_summary():
    record = _record([0.0, 0.5])
    metrics = RunMetrics(record, step_times=[0.001, 0.003], max_speed=0.002, catheter_speed=0.0005,
                         min_clearance=0.0)
    summary = metrics.to_dict()
    assert summary["steps"] == 2
    assert summary["step_latency_ms"]["mean"] == pytest.approx(2.0)
    assert summary["step_latency_ms"]["max"] == pytest.approx(3.0)
    assert summary["speed_ratio"] == pytest.approx(4.0)
    assert summary["final_slab_avg_disp"] == 0.5


# =============================================================================
# MISMATCH
# =============================================================================

def test_identical_curves_have_zero_mismatch():
    ref = DisplacementCurve([0.0, 0.01, 0.02], [0.0, 0.001, 0.003])
    assert mismatch_score(ref, ref).mse_pct == 0.0


def test_ten_percent_overshoot():
    ref = DisplacementCurve([0.0, 0.01, 0.02], [0.002, 0.002, 0.002])
    sim = DisplacementCurve([0.0, 0.01, 0.02], [0.0022, 0.0022, 0.0022])
    result = mismatch_score(sim, ref)
    assert result.mse_pct == pytest.approx(10.0)
    assert result.per_depth["rel_error"].to_numpy() == pytest.approx(np.full(3, 0.1))


def test_mismatch_uses_the_overlap_only():
    ref = DisplacementCurve([0.0, 1.0], [1.0, 1.0])
    sim = DisplacementCurve([0.5, 1.5], [1.0, 1.0])
    result = mismatch_score(sim, ref)
    assert result.overlap == (0.5, 1.0)
    assert result.overlap_width == pytest.approx(0.5)
    assert result.per_depth["depth"].min() == 0.5
    assert result.per_depth["depth"].max() == 1.0


def test_disjoint_curves_raise():
    with pytest.raises(MeasurementError, match="do not overlap"):
        mismatch_score(DisplacementCurve([0.0, 1.0], [0, 1]), DisplacementCurve([2.0, 3.0], [0, 1]))


def test_mismatch_is_invariant_to_sample_order():
    a = DisplacementCurve.from_points([0.02, 0.0, 0.01], [0.003, 0.0, 0.001])
    b = DisplacementCurve([0.0, 0.01, 0.02], [0.0, 0.0012, 0.0033])
    assert mismatch_score(a, b).mse_pct == pytest.approx(mismatch_score(
        DisplacementCurve([0.0, 0.01, 0.02], [0.0, 0.001, 0.003]), b).mse_pct)


def test_zero_reference_normalizes_by_one_meter():
    ref = DisplacementCurve([0.0, 1.0], [0.0, 0.0])
    sim = DisplacementCurve([0.0, 1.0], [0.01, 0.01])
    assert mismatch_score(sim, ref).mse_pct == pytest.approx(1.0)


def test_curve_requires_two_points():
    with pytest.raises(MeasurementError):
        DisplacementCurve([0.0], [0.0])


def test_curve_from_points_averages_duplicate_depths():
    curve = DisplacementCurve.from_points([0.0, 0.01, 0.01], [0.0, 1.0, 3.0])
    assert curve.displacement.tolist() == [0.0, 2.0]


def test_mismatch_result_to_dict():
    ref = DisplacementCurve([0.0, 1.0], [1.0, 2.0])
    d = mismatch_score(ref, ref).to_dict()
    assert set(d) == {"mse_pct", "rmse", "overlap_min", "overlap_max", "overlap_width", "normalizer"}
    assert d["normalizer"] == 2.0
    assert isinstance(mismatch_score(ref, ref).per_depth, pd.DataFrame)
