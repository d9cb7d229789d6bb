import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from longecg.delineation import FeatureTrajectory
from longecg.errors import EmptyInput, LengthMismatch, ZeroReference
from longecg.metrics import (
    REPORT_FIELDS, average_kl, beat_population_summary, density_heatmap, divergences, dtw,
    feature_metric_table, frechet, heatmap_average_kl, metric_report, mmd_rbf, pointwise_errors,
    wasserstein1,
)

seqs = st.lists(st.floats(-10, 10), min_size=1, max_size=12)


def test_dtw_examples():
    assert dtw([1, 2, 3], [1, 2, 3]) == 0
    assert dtw([1, 2, 3], [1, 3]) == 1
    assert dtw([0, 0], [0, 0, 0]) == 0


def test_frechet_examples():
    assert frechet([4, 1, 2], [4, 1, 2]) == 0
    assert frechet([0, 0, 0], [0, 1, 0]) == 1
    assert frechet([5], [7]) == 2


def test_empty_inputs():
    for fn in (dtw, frechet, wasserstein1):
        with pytest.raises(EmptyInput):
            fn([], [1.0])


@given(seqs, seqs)
def test_dtw_properties(a, b):
    assert dtw(a, a) == 0
    assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-9)
    if len(a) == len(b):
        assert dtw(a, b) <= np.sum(np.abs(np.subtract(a, b))) + 1e-9


@given(seqs, seqs)
def test_frechet_properties(a, b):
    assert frechet(a, a) == 0
    assert frechet(a, b) == frechet(b, a)
    assert frechet(a, b) >= abs(a[-1] - b[-1])
    assert frechet(a, b) >= abs(a[0] - b[0])


@settings(max_examples=60)
@given(st.lists(st.integers(-4, 4), min_size=1, max_size=5),
       st.lists(st.integers(-4, 4), min_size=1, max_size=5))
def test_warping_against_path_enumeration(a, b):
    assert dtw(a, b) == oracles.dtw_brute(a, b)
    assert frechet(a, b) == oracles.frechet_brute(a, b)


def test_pointwise_examples():
    assert pointwise_errors([1, 2], [1, 2]) == {
        "euclidean": 0, "rmse": 0, "mae": 0, "mse": 0, "prd": 0}
    e = pointwise_errors([1, 0], [0, 0])
    assert e["euclidean"] == 1 and e["mse"] == 0.5 and e["mae"] == 0.5 and e["prd"] == 100
    assert e["rmse"] == pytest.approx(0.7071, abs=1e-4)
    assert pointwise_errors([2], [1])["prd"] == 50


def test_pointwise_errors_raise():
    with pytest.raises(LengthMismatch):
        pointwise_errors([1, 2], [1])
    with pytest.raises(ZeroReference):
        pointwise_errors([0, 0], [1, 1])


def test_divergence_examples():
    x = [0.3, 1.2, -0.7, 2.0]
    d = divergences(x, list(reversed(x)))
    for k in ("ks", "wasserstein", "js", "mmd"):
        assert abs(d[k]) <= 1e-9
    d = divergences([1, 2, 3], [2, 3, 4])
    assert d["ks"] == pytest.approx(1 / 3) and d["wasserstein"] == pytest.approx(1.0)
    d = divergences([0.0], [1.0])
    assert d["ks"] == 1 and d["wasserstein"] == 1
    assert d["js"] == pytest.approx(math.log(2), abs=1e-8)


def test_moment_differences_signed():
    d = divergences([0.0, 0.0, 3.0], [1.0, 1.0, 1.0])
    assert d["mean_diff"] == 0.0
    assert d["var_diff"] == pytest.approx(2.0)
    assert d["skew_diff"] > 0
    assert divergences([1.0, 2.0], [3.0, 4.0])["mean_diff"] == -2.0


def test_constant_inputs_fall_back():
    d = divergences([2.0, 2.0], [2.0, 2.0])
    assert d["mmd"] == 0 and d["kl"] == 0 and np.isfinite(list(d.values())).all()


@settings(max_examples=60)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6),
       st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_w1_against_transport_lp(x, y):
    ref = oracles.wasserstein_lp(x, y)
    assert wasserstein1(x, y) == pytest.approx(ref, abs=1e-7)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30),
       st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_js_bounds_and_symmetry(x, y):
    a, b = divergences(x, y), divergences(y, x)
    assert -1e-12 <= a["js"] <= math.log(2) + 1e-12
    assert a["js"] == pytest.approx(b["js"], abs=1e-12)
    assert 0 <= a["ks"] <= 1
    assert a["mmd"] >= -1e-12
    assert divergences(x, x)["kl"] == pytest.approx(0, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0.1, 5))
def test_mmd_hand_expansion(x, y, h):
    assert mmd_rbf(x, y, bandwidth=h) == pytest.approx(
        max(oracles.mmd_expanded(x, y, h), 0.0), abs=1e-12)


def test_mmd_bandwidth_is_median_distance():
    x, y = [0.0, 1.0], [3.0]
    h = np.median([1.0, 3.0, 2.0])
    assert mmd_rbf(x, y) == pytest.approx(oracles.mmd_expanded(x, y, h), abs=1e-12)


def test_summary_examples():
    mean, std = beat_population_summary([[0, 2], [2, 0]])
    assert mean.tolist() == [1, 1] and std.tolist() == [1, 1]
    _, std1 = beat_population_summary([[1.0, 5.0, 2.0]])
    assert np.all(std1 == 0)
    rng = np.random.default_rng(0)
    m, s = beat_population_summary(rng.normal(size=(10000, 181)))
    assert m.shape == s.shape == (181,) and np.isfinite(m).all() and np.isfinite(s).all()
    with pytest.raises(LengthMismatch):
        beat_population_summary([[1, 2], [1]])
    with pytest.raises(EmptyInput):
        beat_population_summary([])


def test_heatmap_identical_is_zero():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(200, 20))
    hm = density_heatmap(a, a.copy())
    assert np.all(hm.difference == 0)


def test_heatmap_shift_sign_pattern():
    rng = np.random.default_rng(2)
    real = rng.normal(0, 0.2, size=(500, 30))
    hm = density_heatmap(real, real + 1.0)
    centres = 0.5 * (hm.bin_edges[:-1] + hm.bin_edges[1:])
    lo, hi = centres < 0.3, centres > 0.7
    for row in hm.difference:
        assert row[hi].sum() > 0 and row[lo].sum() < 0
    mass = (hm.real_density * hm.bin_width).sum(axis=1)
    assert np.allclose(mass, 1.0, atol=1e-6)
    assert np.allclose((hm.synth_density * hm.bin_width).sum(axis=1), 1.0, atol=1e-6)


def test_heatmap_kl_matches_divergences():
    rng = np.random.default_rng(3)
    real = rng.normal(0, 0.2, size=(300, 15))
    synth = real[:250] + 0.3
    hm = density_heatmap(real, synth)
    direct = np.mean([divergences(real[:, t], synth[:, t], bin_edges=hm.bin_edges)["kl"]
                      for t in range(15)])
    assert heatmap_average_kl(hm) == pytest.approx(direct, rel=1e-12)


def test_heatmap_length_mismatch():
    with pytest.raises(LengthMismatch):
        density_heatmap(np.zeros((3, 4)), np.zeros((3, 5)))


def test_report_fields_and_ranges():
    rng = np.random.default_rng(4)
    real = rng.normal(1.0, 0.2, size=(200, 40))
    synth = rng.normal(1.1, 0.25, size=(150, 40))
    rep = metric_report(real, synth)
    assert [r[0] for r in rep.rows()] == [k for k, _ in REPORT_FIELDS]
    v = rep.values
    assert all(np.isfinite(list(v.values())))
    assert all(x >= 0 for x in v.values())
    assert 0 <= v["avg_js"] <= math.log(2) and 0 <= v["avg_ks"] <= 1
    assert v["avg_mean_diff"] == pytest.approx(v["mae"], rel=1e-12)
    assert v["avg_kl"] == pytest.approx(average_kl(real, synth), rel=1e-12)


def test_report_self_is_zero():
    rng = np.random.default_rng(5)
    real = rng.normal(size=(50, 10)) + 2.0
    v = metric_report(real, real.copy()).values
    assert all(abs(x) <= 1e-9 for x in v.values())


def test_feature_table():
    rng = np.random.default_rng(6)
    names = ("R_Int", "R_Amp")
    a = FeatureTrajectory(np.column_stack([rng.normal(800, 40, 300), rng.normal(1, .1, 300)]),
                          np.zeros(300, int), names)
    b = FeatureTrajectory(a.values + [8.0, 0.0], np.zeros(300, int), names)
    t = feature_metric_table(a, b)
    assert t["R_Int"]["mean_diff"] == pytest.approx(8.0)
    assert t["R_Int"]["mean_diff_samples"] == pytest.approx(8.0 * 128 / 1000)
    assert "mean_diff_samples" not in t["R_Amp"]
    assert t["R_Amp"]["ks"] == 0


def test_deterministic():
    rng = np.random.default_rng(7)
    real, synth = rng.normal(size=(100, 12)), rng.normal(size=(80, 12))
    assert metric_report(real, synth).values == metric_report(real, synth).values
