"""Multi-object error metrics: OSPA, trajectory OSPA (OSPA2), CLEAR-MOT and a segment Hausdorff distance.

Trajectories are passed as a list over scans of ``{label: position}``
mappings; positions are 2-vectors (centroids only, extents are ignored).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, List, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

Frames = Sequence[Mapping[Hashable, np.ndarray]]


@dataclass(frozen=True)
class MetricConfig:
    ospa_cutoff: float = 2.0
    ospa_order: float = 1.0
    ospa2_window: int = 5
    mot_threshold: float = 1.0

    def __post_init__(self):
        if self.ospa_cutoff <= 0 or self.ospa_order < 1:
            raise ValueError("need c > 0 and p >= 1")
        if self.ospa2_window < 1 or self.mot_threshold <= 0:
            raise ValueError("window must be >= 1 and threshold > 0")


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, 2)


def _ospa_from_costs(d: np.ndarray, c: float, p: float) -> float:
    """OSPA given the pairwise base distances ``d`` (m x n)."""
    m, n = d.shape
    if m == 0 and n == 0:
        return 0.0
    big = max(m, n)
    if min(m, n) == 0:
        return float(c)
    cost = np.minimum(d, c) ** p
    r, k = linear_sum_assignment(cost)
    total = cost[r, k].sum() + c ** p * (big - min(m, n))
    return float((total / big) ** (1.0 / p))


def ospa(est, truth, c: float = 2.0, p: float = 1.0) -> float:
    """OSPA distance between two point sets (Hungarian assignment)."""
    x, y = _as_points(est), _as_points(truth)
    if len(x) == 0 or len(y) == 0:
        return 0.0 if len(x) == len(y) else float(c)
    return _ospa_from_costs(cdist(x, y), c, p)


def ospa_per_scan(est: Frames, truth: Frames, c: float = 2.0, p: float = 1.0) -> np.ndarray:
    return np.array([ospa(list(e.values()), list(t.values()), c, p) for e, t in zip(est, truth)])


def _track_table(frames: Frames, lo: int, hi: int):
    """Labels alive in ``[lo, hi]`` with their (window, 2) positions and presence mask."""
    labels: List[Hashable] = []
    for f in frames[lo:hi + 1]:
        for lab in f:
            if lab not in labels:
                labels.append(lab)
    w = hi - lo + 1
    pos = np.full((len(labels), w, 2), np.nan)
    for j, f in enumerate(frames[lo:hi + 1]):
        for i, lab in enumerate(labels):
            if lab in f:
                pos[i, j] = np.asarray(f[lab], dtype=float)[:2]
    return pos, ~np.isnan(pos[..., 0])


def _trajectory_distances(px, mx, py, my, c, p):
    """Time-averaged base distance between every pair of trajectories.

    Scans where both exist contribute ``min(c, d)^p``, scans where exactly
    one exists contribute ``c^p``; the mean is over the union of the two
    existence sets.
    """
    d = np.linalg.norm(px[:, None] - py[None], axis=-1)          # (nx, ny, w)
    both = mx[:, None] & my[None]
    one = mx[:, None] ^ my[None]
    terms = np.where(both, np.minimum(np.nan_to_num(d, nan=c), c) ** p, 0.0) + np.where(one, c ** p, 0.0)
    union = (both | one).sum(axis=-1)
    return (terms.sum(axis=-1) / np.maximum(union, 1)) ** (1.0 / p)


def ospa2(est: Frames, truth: Frames, c: float = 2.0, p: float = 1.0, window: int = 5) -> np.ndarray:
    """Per-scan OSPA2 over a trailing window of ``window`` scans.

    Trajectories present anywhere in the window are compared with the
    time-averaged base distance and then assigned as in OSPA, so a label
    switch inside the window is penalised.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    out = np.zeros(len(truth))
    for k in range(len(truth)):
        lo = max(0, k - window + 1)
        px, mx = _track_table(est, lo, k)
        py, my = _track_table(truth, lo, k)
        if len(px) == 0 or len(py) == 0:
            out[k] = 0.0 if len(px) == len(py) else c
            continue
        out[k] = _ospa_from_costs(_trajectory_distances(px, mx, py, my, c, p), c, p)
    return out


@dataclass
class MotResult:
    mota: float
    motp: float
    tp: int
    fp: int
    fn: int
    ids: int
    n_truth: int


def clear_mot(est: Frames, truth: Frames, threshold: float = 1.0) -> MotResult:
    """CLEAR-MOT scores with the keep-then-assign matching protocol.

    Each scan, correspondences from the previous scan are kept while both
    objects exist and stay within ``threshold``; remaining objects are
    matched by minimum total distance among pairs under the threshold.  An
    identity switch is counted when a truth object is matched to a label
    other than the one it was last matched to.
    """
    tp = fp = fn = ids = n_truth = 0
    dist_sum = 0.0
    current: Dict[Hashable, Hashable] = {}     # truth -> est, previous scan
    last: Dict[Hashable, Hashable] = {}        # truth -> est, last ever
    for e, t in zip(est, truth):
        n_truth += len(t)
        matches: Dict[Hashable, Hashable] = {}
        for tl, el in current.items():
            if tl in t and el in e and np.linalg.norm(np.subtract(t[tl], e[el])[:2]) <= threshold:
                matches[tl] = el
        free_t = [tl for tl in t if tl not in matches]
        taken = set(matches.values())
        free_e = [el for el in e if el not in taken]
        if free_t and free_e:
            d = cdist(_as_points([t[x][:2] for x in free_t]), _as_points([e[x][:2] for x in free_e]))
            cost = np.where(d <= threshold, d, 1e6)
            r, k = linear_sum_assignment(cost)
            for i, j in zip(r, k):
                if d[i, j] <= threshold:
                    matches[free_t[i]] = free_e[j]
        for tl, el in matches.items():
            if tl in last and last[tl] != el:
                ids += 1
            last[tl] = el
            dist_sum += float(np.linalg.norm(np.subtract(t[tl], e[el])[:2]))
        tp += len(matches)
        fn += len(t) - len(matches)
        fp += len(e) - len(matches)
        current = matches
    mota = 1.0 - (fp + fn + ids) / n_truth if n_truth else 1.0
    motp = dist_sum / tp if tp else float("nan")
    return MotResult(mota, motp, tp, fp, fn, ids, n_truth)


def point_segment_distance(pt, a, b) -> float:
    pt, a, b = (np.asarray(v, dtype=float) for v in (pt, a, b))
    ab = b - a
    den = float(ab @ ab)
    s = 0.0 if den == 0 else float(np.clip((pt - a) @ ab / den, 0.0, 1.0))
    return float(np.linalg.norm(pt - (a + s * ab)))


def hausdorff_segment(est_endpoints, truth_segment) -> float:
    """Endpoint-to-segment Hausdorff distance between two line segments."""
    ea, eb = est_endpoints
    ta, tb = truth_segment
    fwd = max(point_segment_distance(ea, ta, tb), point_segment_distance(eb, ta, tb))
    bwd = max(point_segment_distance(ta, ea, eb), point_segment_distance(tb, ea, eb))
    return max(fwd, bwd)
