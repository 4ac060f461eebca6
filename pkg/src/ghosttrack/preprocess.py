"""Per-scan measurement preprocessing for birth and partitioning.

Stationary returns (small Doppler) are searched for straight lines with a
(rho, theta) Hough accumulator; stationary points near a line are kept as
candidate reflector returns.  Those plus all moving returns are clustered
by distance at several thresholds, giving a handful of candidate
partitions per scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

Subset = Tuple[int, ...]
Partition = Tuple[Subset, ...]


@dataclass(frozen=True)
class HoughConfig:
    rho_res: float = 0.5
    theta_res: float = np.deg2rad(1.0)
    vote_threshold: int = 10
    d_max: float = 1.0
    rdot_min: float = 1.0

    def __post_init__(self):
        if min(self.rho_res, self.theta_res, self.d_max, self.rdot_min) <= 0 or self.vote_threshold < 1:
            raise ValueError("Hough parameters must be positive")


@dataclass(frozen=True)
class DetectedLine:
    rho: float
    theta: float
    supporting_indices: Tuple[int, ...] = field(default=())

    @property
    def normal(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    def distance(self, points) -> np.ndarray:
        return np.abs(np.atleast_2d(points) @ self.normal - self.rho)


@dataclass(frozen=True)
class PartitionSet:
    partitions: Tuple[Partition, ...]

    def __post_init__(self):
        for part in self.partitions:
            seen = set()
            for sub in part:
                if not sub:
                    raise ValueError("empty subset in partition")
                if seen.intersection(sub):
                    raise ValueError("subsets in a partition overlap")
                seen.update(sub)

    def __len__(self):
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def subsets(self) -> List[Subset]:
        """Distinct subsets across all partitions, in first-seen order."""
        out, seen = [], set()
        for part in self.partitions:
            for sub in part:
                if sub not in seen:
                    seen.add(sub)
                    out.append(sub)
        return out


def split_doppler(z, rdot_min: float):
    """Indices of stationary (``|rdot| < rdot_min``) and moving returns."""
    if rdot_min <= 0:
        raise ValueError("rdot_min must be positive")
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    still = np.abs(z[:, 2]) < rdot_min
    return np.flatnonzero(still), np.flatnonzero(~still)


def to_cartesian(z, radar_pos=(0.0, 0.0)) -> np.ndarray:
    """Direct-path Cartesian positions of ``(range, azimuth, ...)`` rows."""
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    return np.asarray(radar_pos, float) + z[:, :1] * np.column_stack([np.cos(z[:, 1]), np.sin(z[:, 1])])


def hough_lines(points, cfg: HoughConfig) -> List[DetectedLine]:
    """Straight lines through at least ``vote_threshold`` points.

    Accumulator peaks are local maxima over the 3x3 neighbourhood
    (theta wraps with a rho flip).  Each line is refit by total least
    squares on its supporting points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < cfg.vote_threshold:
        return []
    thetas = np.arange(0.0, np.pi, cfg.theta_res)
    rho_max = np.abs(pts).sum(axis=1).max() + cfg.rho_res
    n_rho = int(np.ceil(2 * rho_max / cfg.rho_res)) + 1
    rho = pts @ np.vstack([np.cos(thetas), np.sin(thetas)])
    bins = np.floor((rho + rho_max) / cfg.rho_res).astype(int)
    acc = np.zeros((thetas.size, n_rho), dtype=int)
    np.add.at(acc, (np.broadcast_to(np.arange(thetas.size)[None, :], bins.shape), bins), 1)

    # theta wraps onto itself with rho -> -rho; pad with the flipped rows
    padded = np.vstack([acc[-1:, ::-1], acc, acc[:1, ::-1]])
    peaks = maximum_filter(padded, size=3, mode="constant")[1:-1] == acc
    cand = np.argwhere(peaks & (acc >= cfg.vote_threshold))
    order = np.argsort(-acc[cand[:, 0], cand[:, 1]], kind="stable")

    lines: List[DetectedLine] = []
    for ti, ri in cand[order]:
        th = thetas[ti]
        r0 = (ri + 0.5) * cfg.rho_res - rho_max
        n = np.array([np.cos(th), np.sin(th)])
        sup = np.flatnonzero(np.abs(pts @ n - r0) <= cfg.d_max)
        if sup.size < cfg.vote_threshold:
            continue
        th, r0 = _tls_line(pts[sup], th)
        n = np.array([np.cos(th), np.sin(th)])
        sup = np.flatnonzero(np.abs(pts @ n - r0) <= cfg.d_max)
        if sup.size < cfg.vote_threshold:
            continue
        if any(_same_line(th, r0, ln, cfg) for ln in lines):
            continue
        lines.append(DetectedLine(float(r0), float(th), tuple(int(i) for i in sup)))
    return lines


def _tls_line(pts: np.ndarray, theta_hint: float):
    """Total-least-squares normal form, normal kept near ``theta_hint``."""
    c = pts.mean(axis=0)
    w, v = np.linalg.eigh(np.cov((pts - c).T) if len(pts) > 1 else np.eye(2))
    n = v[:, 0]
    if n @ np.array([np.cos(theta_hint), np.sin(theta_hint)]) < 0:
        n = -n
    th = np.arctan2(n[1], n[0])
    return th, float(c @ n)


def _same_line(th, r0, other: DetectedLine, cfg: HoughConfig) -> bool:
    d_th = abs((th - other.theta + np.pi / 2) % np.pi - np.pi / 2)
    flip = np.cos(th - other.theta) < 0
    d_r = abs(r0 + other.rho) if flip else abs(r0 - other.rho)
    return d_th <= 2 * cfg.theta_res and d_r <= 2 * cfg.rho_res


def gate_reflector_meas(points, lines: Sequence[DetectedLine], d_max: float) -> np.ndarray:
    """Indices of points within ``d_max`` of any detected line."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if not lines or len(pts) == 0:
        return np.zeros(0, dtype=int)
    dist = np.min([ln.distance(pts) for ln in lines], axis=0)
    return np.flatnonzero(dist <= d_max)


def cluster_labels(positions, threshold: float) -> np.ndarray:
    """Connected components of the graph linking points closer than ``threshold``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(pos).query_pairs(threshold, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def make_partitions(meas_idx, positions, thresholds: Sequence[float],
                    max_partitions: int = 8) -> PartitionSet:
    """One distance-clustering partition per threshold, deduplicated."""
    thresholds = list(thresholds)
    if not thresholds or any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be non-empty and ascending")
    idx = np.asarray(meas_idx, dtype=int).reshape(-1)
    if idx.size == 0:
        return PartitionSet(((),))
    parts, seen = [], set()
    for thr in thresholds:
        lab = cluster_labels(positions, thr)
        groups = {}
        for i, l in zip(idx, lab):
            groups.setdefault(int(l), []).append(int(i))
        part = tuple(sorted(tuple(sorted(g)) for g in groups.values()))
        if part not in seen:
            seen.add(part)
            parts.append(part)
        if len(parts) >= max_partitions:
            break
    return PartitionSet(tuple(parts))


@dataclass(frozen=True)
class ScanPreprocess:
    """Everything the tracker needs from one scan's preprocessing."""

    stationary: np.ndarray
    moving: np.ndarray
    cartesian: np.ndarray
    lines: Tuple[DetectedLine, ...]
    reflector_idx: np.ndarray
    partitions: PartitionSet


def preprocess_scan(z, cfg: HoughConfig, thresholds: Sequence[float], max_partitions: int = 8,
                    keep_reflector: bool = True, radar_pos=(0.0, 0.0)) -> ScanPreprocess:
    """Doppler split, line detection, gating and clustering for one scan.

    With ``keep_reflector=False`` every stationary return is dropped
    before clustering.
    """
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    still, moving = split_doppler(z, cfg.rdot_min)
    cart = to_cartesian(z, radar_pos)
    lines: Tuple[DetectedLine, ...] = ()
    refl = np.zeros(0, dtype=int)
    if keep_reflector and still.size:
        found = hough_lines(cart[still], cfg)
        lines = tuple(DetectedLine(ln.rho, ln.theta, tuple(int(still[i]) for i in ln.supporting_indices))
                      for ln in found)
        refl = still[gate_reflector_meas(cart[still], found, cfg.d_max)]
    keep = np.sort(np.concatenate([moving, refl]))
    parts = make_partitions(keep, cart[keep], thresholds, max_partitions)
    return ScanPreprocess(still, moving, cart, lines, refl, parts)
