import numpy as np
import pytest
from scipy.spatial.distance import cdist

from ghosttrack import metrics as mt
from oracles import ospa_brute


def test_ospa_examples():
    assert mt.ospa([], [], 2, 1) == 0.0
    assert mt.ospa([[0, 0]], [], 2, 1) == 2.0
    assert mt.ospa([[0, 0]], [[1, 0]], 2, 1) == pytest.approx(1.0)
    assert mt.ospa([[0, 0]], [[5, 0]], 2, 1) == pytest.approx(2.0)
    # one matched at 0.5, one unmatched: (0.5 + 2) / 2
    assert mt.ospa([[0, 0], [9, 9]], [[0.5, 0]], 2, 1) == pytest.approx(1.25)
    # p = 2: sqrt((0.5^2 + 2^2) / 2)
    assert mt.ospa([[0, 0], [9, 9]], [[0.5, 0]], 2, 2) == pytest.approx(np.sqrt(4.25 / 2))


def test_ospa_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        x = rng.uniform(0, 5, size=(rng.integers(0, 6), 2))
        y = rng.uniform(0, 5, size=(rng.integers(0, 6), 2))
        p = rng.choice([1.0, 2.0])
        assert mt.ospa(x, y, 2.0, p) == pytest.approx(ospa_brute(x, y, 2.0, p), abs=1e-9)


def test_ospa_metric_axioms():
    rng = np.random.default_rng(1)
    sets = lambda: rng.uniform(0, 4, size=(rng.integers(0, 5), 2))
    for _ in range(1000):
        x, y, z = sets(), sets(), sets()
        dxy, dyz, dxz = mt.ospa(x, y), mt.ospa(y, z), mt.ospa(x, z)
        assert dxz <= dxy + dyz + 1e-12
        assert dxy == pytest.approx(mt.ospa(y, x), abs=1e-12)
        assert mt.ospa(x, x) == 0.0
        assert 0.0 <= dxy <= 2.0


def test_ospa_per_scan_ignores_labels():
    est = [{"a": np.array([0.0, 0.0])}, {"b": np.array([0.0, 0.0])}]
    truth = [{1: np.array([0.0, 0.0])}, {1: np.array([1.0, 0.0])}]
    assert np.allclose(mt.ospa_per_scan(est, truth), [0.0, 1.0])


def test_metric_config_validation():
    with pytest.raises(ValueError):
        mt.MetricConfig(ospa_cutoff=0.0)
    with pytest.raises(ValueError):
        mt.MetricConfig(ospa2_window=0)


def _line_frames(n, label_of=lambda k: "a", offset=0.0):
    est = [{label_of(k): np.array([k + offset, 0.0])} for k in range(n)]
    truth = [{1: np.array([float(k), 0.0])} for k in range(n)]
    return est, truth


def test_ospa2_perfect_and_offset():
    est, truth = _line_frames(10)
    assert np.allclose(mt.ospa2(est, truth), 0.0)
    est, truth = _line_frames(10, offset=0.5)
    assert np.allclose(mt.ospa2(est, truth), 0.5)
    assert np.allclose(mt.ospa2([{}] * 3, [{}] * 3), 0.0)
    assert np.allclose(mt.ospa2([{}] * 3, truth[:3]), 2.0)


def test_ospa2_penalises_label_switch():
    est, truth = _line_frames(10, label_of=lambda k: "a" if k < 5 else "b")
    o1 = mt.ospa_per_scan(est, truth)
    o2 = mt.ospa2(est, truth, window=5)
    assert np.allclose(o1, 0.0)
    assert np.all(o2[:5] == 0.0) and np.all(o2[5:9] > 0.0) and o2[9] == 0.0
    # at k = 6 the window holds 3 scans of "a" and 2 of "b": best pair is
    # ("a", 1) with 2 of 5 scans unmatched, plus "b" left over
    d_a = (2 * 2.0) / 5
    assert o2[6] == pytest.approx((d_a + 2.0) / 2)


def test_ospa2_existence_mismatch():
    # estimate starts two scans late: window average over the union of existence
    truth = [{1: np.array([0.0, 0.0])} for _ in range(5)]
    est = [{} if k < 2 else {"a": np.array([0.0, 0.0])} for k in range(5)]
    assert mt.ospa2(est, truth, window=5)[4] == pytest.approx(2 * 2.0 / 5)


def test_clear_mot_examples():
    est, truth = _line_frames(10)
    r = mt.clear_mot(est, truth)
    assert (r.mota, r.motp, r.tp, r.fp, r.fn, r.ids, r.n_truth) == (1.0, 0.0, 10, 0, 0, 0, 10)
    r = mt.clear_mot([{}] * 10, truth)
    assert r.mota == 0.0 and r.fn == 10 and np.isnan(r.motp)
    est, truth = _line_frames(10, label_of=lambda k: "a" if k < 5 else "b")
    r = mt.clear_mot(est, truth)
    assert r.ids == 1 and r.mota == pytest.approx(0.9)
    # far-off estimate: one FN and one FP per scan
    est, truth = _line_frames(4, offset=3.0)
    r = mt.clear_mot(est, truth)
    assert (r.tp, r.fp, r.fn) == (0, 4, 4) and r.mota == pytest.approx(-1.0)


def test_clear_mot_keeps_previous_correspondence():
    # two estimates near one truth; the nearer one changes, but the kept match stays
    truth = [{1: np.array([0.0, 0.0])}] * 3
    est = [{"a": np.array([0.2, 0.0]), "b": np.array([0.6, 0.0])},
           {"a": np.array([0.5, 0.0]), "b": np.array([0.1, 0.0])},
           {"a": np.array([0.5, 0.0]), "b": np.array([0.1, 0.0])}]
    r = mt.clear_mot(est, truth)
    assert r.ids == 0 and r.tp == 3 and r.fp == 3
    assert r.motp == pytest.approx(0.4)


def test_clear_mot_identities_on_random_frames():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = 15
        truth = [{i: rng.uniform(0, 5, 2) for i in range(3) if rng.random() < 0.8} for _ in range(n)]
        est = [{j: rng.uniform(0, 5, 2) for j in "abcd" if rng.random() < 0.7} for _ in range(n)]
        r = mt.clear_mot(est, truth)
        assert r.tp + r.fn == r.n_truth == sum(len(t) for t in truth)
        assert r.tp + r.fp == sum(len(e) for e in est)
        assert r.mota == pytest.approx(1 - (r.fp + r.fn + r.ids) / r.n_truth)


def test_point_segment_distance():
    assert mt.point_segment_distance([0, 1], [-1, 0], [1, 0]) == pytest.approx(1.0)
    assert mt.point_segment_distance([3, 0], [-1, 0], [1, 0]) == pytest.approx(2.0)
    assert mt.point_segment_distance([3, 4], [0, 0], [0, 0]) == pytest.approx(5.0)


def test_hausdorff_examples_and_dense_oracle():
    seg = (np.array([5.0, 15.0]), np.array([35.0, 15.0]))
    assert mt.hausdorff_segment(seg, seg) == 0.0
    assert mt.hausdorff_segment((np.array([5.0, 16.0]), np.array([35.0, 16.0])), seg) == pytest.approx(1.0)
    assert mt.hausdorff_segment((np.array([5.0, 15.0]), np.array([30.0, 15.0])), seg) == pytest.approx(5.0)
    rng = np.random.default_rng(3)
    t = np.linspace(0, 1, 4001)[:, None]
    for _ in range(50):
        a, b, c, d = rng.uniform(-10, 10, size=(4, 2))
        pa, pb = a + t * (b - a), c + t * (d - c)
        dd = cdist(pa, pb)
        dense = max(dd.min(axis=1).max(), dd.min(axis=0).max())
        assert mt.hausdorff_segment((a, b), (c, d)) == pytest.approx(dense, abs=1e-2)
