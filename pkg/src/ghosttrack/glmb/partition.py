"""Prediction-driven measurement partition.

Distance clustering at fixed thresholds cannot separate two ghost clusters
that overlap while keeping each object's returns in one cell.  This extra
candidate partition groups each measurement with the predicted (track,
path) return it best fits, using the MAP hypothesis of the prior; returns
outside every gate are clustered by distance as usual.
"""
from __future__ import annotations

from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2

from .. import geometry as geo
from ..errors import TrackingError
from ..ggiw import expected_extent, ggiw_predict, measurement_cov, predicted_measurement
from ..preprocess import PartitionSet, cluster_labels
from .kernels import segment_support
from .recursion import map_component
from .types import OBJECT, REFLECTOR, FilterConfig, GlmbDensity, Label

GATE = float(chi2.ppf(0.99, 3))


def _object_gates(chi, z, idx, radar, lines, cfg: FilterConfig) -> np.ndarray:
    """Squared Mahalanobis distances (paths x measurements) to every feasible path return."""
    paths = [(0, None)]
    if cfg.multipath_enabled:
        paths += [(m, ln) for m in geo.MULTIPATH for ln in lines.values()
                  if geo.path_feasible(chi.mu[:2], radar, ln, m)]
    out = []
    for m, ln in paths:
        try:
            zhat, jac = predicted_measurement(chi, m, radar, ln)
            s = jac @ chi.p_cov @ jac.T + measurement_cov(jac[:2, :2], expected_extent(chi), cfg.noise)
            d = z[idx] - zhat
            d[:, 1] = geo.wrap_angle(d[:, 1])
            out.append(np.einsum("ij,ij->i", d, np.linalg.solve(s, d.T).T))
        except (TrackingError, np.linalg.LinAlgError):
            continue
    return np.array(out).reshape(-1, len(idx))


def prediction_partition(prior: GlmbDensity, z, cart, meas_idx, reflector_idx,
                         lines: Dict[Label, geo.ReflectorLine], radar: geo.RadarState,
                         cfg: FilterConfig) -> Optional[Tuple[tuple, ...]]:
    """Partition of ``meas_idx`` driven by the prior MAP tracks, or ``None`` without tracks."""
    comp = map_component(prior)
    idx = np.asarray(meas_idx, dtype=int)
    if comp is None or idx.size == 0:
        return None
    objs = [lab for lab in comp.tracks if lab.kind == OBJECT]
    refls = [lab for lab in comp.tracks if lab.kind == REFLECTOR and lab in lines]
    if not objs and not refls:
        return None
    z = np.asarray(z, dtype=float)
    # one row per (object, path) return and per reflector
    rows = [_object_gates(ggiw_predict(comp.tracks[lab].density, cfg.motion), z, idx, radar, lines, cfg)
            for lab in objs]
    still = np.isin(idx, np.asarray(reflector_idx, dtype=int))
    for lab in refls:
        ln = lines[lab]
        near = np.array([segment_support(cart[[k]], ln.seg_start, ln.seg_end, cfg.reflector_gate) > 0
                         for k in idx], dtype=bool).reshape(-1)
        rows.append(np.where(still & near, 0.0, np.inf)[None])
    cost = np.vstack(rows) if rows else np.full((1, idx.size), np.inf)
    best = np.argmin(cost, axis=0)
    gated = cost[best, np.arange(idx.size)] <= GATE

    groups: Dict[tuple, list] = {}
    for k, (b, g) in enumerate(zip(best, gated)):
        if g:
            groups.setdefault(("t", int(b)), []).append(int(idx[k]))
    rest = idx[~gated]
    if rest.size:
        thr = cfg.cluster_thresholds[len(cfg.cluster_thresholds) // 2]
        for k, l in zip(rest, cluster_labels(cart[rest], thr)):
            groups.setdefault(("c", int(l)), []).append(int(k))
    return tuple(sorted(tuple(sorted(g)) for g in groups.values()))


def with_prediction_partition(parts: PartitionSet, extra: Optional[tuple]) -> PartitionSet:
    """``parts`` with ``extra`` prepended unless absent or already present."""
    if extra is None or extra in parts.partitions:
        return parts
    return PartitionSet((extra,) + tuple(parts.partitions))
