"""Joint prediction and update, pruning, and MAP track extraction."""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .. import geometry as geo
from ..errors import EmptyPosterior
from ..ggiw import ggiw_estimate
from ..preprocess import PartitionSet
from ..stick import stick_estimate, stick_line
from .gibbs import gibbs_indices
from .kernels import ScanContext, association_weight_table
from .types import (OBJECT, REFLECTOR, BirthEntry, FilterConfig, GlmbComponent, GlmbDensity,
                    Label, Snapshot, TrackDensity, TrackEstimate)


def child_history(history: int, scan: int, desc) -> int:
    return hash((history, scan, desc))


def joint_predict_update(prior: GlmbDensity, z, partitions: PartitionSet,
                         reflector_lines: Dict[Label, geo.ReflectorLine], radar: geo.RadarState,
                         cfg: FilterConfig, rng: np.random.Generator,
                         births: Sequence[BirthEntry] = (), scan: int = 0) -> GlmbDensity:
    """One predict-update step driven by Gibbs-sampled associations.

    Every component draws its number of Gibbs iterations from a multinomial
    over the prior weights with ``h_max`` trials and runs that many per
    partition.  Children with equal label sets and track histories are
    merged by summing their weights.
    """
    seed = int(rng.integers(2 ** 63))
    ctx = ScanContext(z, radar, cfg, reflector_lines, scan, seed)
    comps = prior.components
    if not comps:
        raise EmptyPosterior("prior has no components")
    budget = rng.multinomial(cfg.h_max, prior.weights / prior.weights.sum())

    merged: Dict[tuple, list] = {}
    for u, part in enumerate(partitions.partitions):
        for h, comp in enumerate(comps):
            if budget[h] == 0:
                continue
            table = association_weight_table(comp, part, ctx, births)
            states = gibbs_indices(table, int(budget[h]), ctx.stream(3, u, h))
            base = np.log(comp.weight)
            for idx in dict.fromkeys(states):
                lw = base + table.log_weight(idx)
                if not lw > -np.inf:
                    continue
                tracks, used = {}, []
                for row, key, i in zip(table.rows, table.track_keys, idx):
                    if i == 0:
                        continue
                    hist = child_history(key[1], ctx.scan, row.descriptors[i])
                    tracks[row.label] = TrackDensity(row.label, row.posteriors[i], hist)
                    used.extend(row.used[i])
                ckey = tuple(tracks[l].key for l in sorted(tracks))
                if ckey in merged:
                    merged[ckey][0] = np.logaddexp(merged[ckey][0], lw)
                else:
                    merged[ckey] = [lw, tracks, frozenset(used)]
    if not merged:
        raise EmptyPosterior(f"scan {scan}: every child hypothesis has zero weight")
    lws = np.array([v[0] for v in merged.values()])
    w = np.exp(lws - logsumexp(lws))
    w /= w.sum()
    out = [GlmbComponent(float(wi), v[1], v[2]) for wi, v in zip(w, merged.values())]
    return GlmbDensity(tuple(out))


def prune_and_cap(glmb: GlmbDensity, cfg: FilterConfig) -> GlmbDensity:
    """Drop components below ``w_min``, keep the ``h_max`` heaviest, renormalize.

    Ties keep the earlier component (stable sort).
    """
    w = glmb.weights
    if w.size == 0:
        return glmb
    keep = np.flatnonzero(w >= cfg.w_min)
    if keep.size == 0:
        keep = np.array([int(np.argmax(w))])
    order = keep[np.argsort(-w[keep], kind="stable")][:cfg.h_max]
    order = np.sort(order)
    total = w[order].sum()
    comps = [GlmbComponent(float(glmb.components[i].weight / total), glmb.components[i].tracks,
                           glmb.components[i].used) for i in order]
    return GlmbDensity(tuple(comps))


def cardinality_distribution(glmb: GlmbDensity) -> np.ndarray:
    n = max((len(c) for c in glmb.components), default=0)
    rho = np.zeros(n + 1)
    for c in glmb.components:
        rho[len(c)] += c.weight
    return rho


def map_component(glmb: GlmbDensity) -> Optional[GlmbComponent]:
    """Heaviest component among those with the MAP cardinality."""
    if not glmb.components:
        return None
    n_star = int(np.argmax(cardinality_distribution(glmb)))
    best = None
    for c in glmb.components:
        if len(c) == n_star and (best is None or c.weight > best.weight):
            best = c
    return best


def track_estimate(trk: TrackDensity) -> TrackEstimate:
    if trk.label.kind == OBJECT:
        rate, kin, ext = ggiw_estimate(trk.density)
        return TrackEstimate(trk.label, kin, ext, float(rate))
    kin, ext = stick_estimate(trk.density)
    d = trk.density
    return TrackEstimate(trk.label, kin, ext, float(d.gamma_alpha / d.gamma_beta))


def extract_estimates(glmb: GlmbDensity) -> Snapshot:
    comp = map_component(glmb)
    if comp is None:
        return ()
    return tuple(track_estimate(comp.tracks[l]) for l in comp.labels)


def reflector_lines(glmb: GlmbDensity) -> Dict[Label, geo.ReflectorLine]:
    """Frozen reflector geometry for the next scan.

    Each reflector label takes its estimate from the MAP component when it
    is there, otherwise from the heaviest component containing it.
    """
    out: Dict[Label, geo.ReflectorLine] = {}
    first = map_component(glmb)
    order = sorted(range(len(glmb)), key=lambda i: -glmb.components[i].weight)
    comps = ([first] if first is not None else []) + [glmb.components[i] for i in order]
    for c in comps:
        for lab, trk in c.tracks.items():
            if lab.kind == REFLECTOR and lab not in out:
                kin, ext = stick_estimate(trk.density)
                out[lab] = stick_line(kin, ext)
    return out
