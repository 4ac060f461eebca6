"""Association weight tables for one (partition, hypothesis) pair.

A row of the association matrix lists, for one label, the subset index
taken by each column: column 0 is the direct path, then one column per
(bounce path, reflector) pair ordered path-major.  ``-1`` everywhere
means the label died; zeros mean missed.  Row weights are computed in
log space and include the clutter ratio ``1/kappa`` for every assigned
measurement, so hypotheses built from different partitions share a
common scale.  Single-target marginals carry the Poisson count
probability of ``|W|``; the row weight multiplies it by ``|W|!`` so both
sides of the clutter ratio are set densities.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .. import geometry as geo
from ..errors import TrackingError
from ..ggiw import (expected_extent, gamma_poisson_log_eta, ggiw_predict, ggiw_update,
                    meas_centroid_scatter, measurement_cov, predicted_measurement)
from ..preprocess import to_cartesian
from ..stick import stick_estimate, stick_endpoints, stick_predict, stick_update
from .types import OBJECT, REFLECTOR, BirthEntry, FilterConfig, GlmbComponent, Label, TrackDensity

DIRECT = (0, -1, -1)
_MASK64 = (1 << 64) - 1


def clutter_density(z, cfg: FilterConfig):
    """Poisson clutter intensity: ``gamma_c / volume`` inside the region, 0 outside."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    inside = np.ones(len(z), dtype=bool)
    for k, (lo, hi) in enumerate(cfg.clutter_region):
        inside &= (z[:, k] >= lo) & (z[:, k] <= hi)
    out = np.where(inside, cfg.clutter_rate / cfg.clutter_volume, 0.0)
    return out if out.size > 1 else float(out[0])


def _log(x: float) -> float:
    return float(np.log(x)) if x > 0 else -np.inf


def _log1m(x: float) -> float:
    return float(np.log1p(-x)) if x < 1 else -np.inf


def _set_factor(n: int) -> float:
    """``log |W|!``: turns the Poisson count probability inside the single-target
    marginals into a set density comparable with the clutter intensity."""
    return float(gammaln(n + 1.0))


@dataclass
class Column:
    key: Tuple[int, int, int]
    path: int
    line: Optional[geo.ReflectorLine] = None


class ScanContext:
    """Per-scan caches shared by every (partition, hypothesis) pair.

    Predicted densities are cached per track key, and sequential update
    results per (track key, assignment prefix), so hypotheses sharing a
    track reuse work.  Random streams for particle steps are derived from
    the scan seed and the track key, never from evaluation order.
    """

    def __init__(self, z, radar: geo.RadarState, cfg: FilterConfig,
                 lines: Dict[Label, geo.ReflectorLine], scan: int, seed: int):
        self.z = np.asarray(z, dtype=float).reshape(-1, 3)
        self.radar = radar
        self.cfg = cfg
        self.lines = dict(lines) if cfg.multipath_enabled else {}
        self.scan = int(scan)
        self.seed = int(seed) & _MASK64
        self.cart = to_cartesian(self.z, radar.position)
        # measurements outside the region are scored with the in-region
        # intensity; the filter never sees a zero clutter density
        self.log_kappa = _log(max(cfg.clutter_rate, 1e-300) / cfg.clutter_volume)
        self._pred: Dict = {}
        self._eta: Dict = {}
        self._centroid: Dict = {}
        self._gate: Dict = {}

    def stream(self, *ints) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.scan] + [int(i) & _MASK64 for i in ints]))

    def predict(self, trk: TrackDensity):
        hit = self._pred.get(trk.key)
        if hit is None:
            hit = predict_density(trk, self.cfg, self.stream(1, *trk.label.ints, trk.history))
            self._pred[trk.key] = hit
        return hit

    def centroid(self, sub):
        hit = self._centroid.get(sub)
        if hit is None:
            hit = meas_centroid_scatter(self.z[list(sub)])[0]
            self._centroid[sub] = hit
        return hit

    def eta(self, trk_key, label: Label, dens, desc: tuple, cols: Dict):
        """Posterior and log marginal after sequential updates along ``desc``."""
        if not desc:
            return dens, 0.0
        ck = (trk_key, desc)
        hit = self._eta.get(ck)
        if hit is not None:
            return hit
        prev, lp = self.eta(trk_key, label, dens, desc[:-1], cols)
        if lp == -np.inf:
            out = (None, -np.inf)
        else:
            colkey, sub = desc[-1]
            try:
                post, lm = self._update(prev, label, cols[colkey], sub, trk_key, desc)
                out = (post, lp + lm) if np.isfinite(lm) else (None, -np.inf)
            except (TrackingError, np.linalg.LinAlgError, ValueError):
                out = (None, -np.inf)
        self._eta[ck] = out
        return out

    def _update(self, dens, label: Label, col: Column, sub, trk_key, desc):
        zs = self.z[list(sub)]
        cfg = self.cfg
        if label.kind == OBJECT:
            return ggiw_update(dens, zs, col.path, col.line, self.radar, cfg.noise)
        rng = self.stream(2, *label.ints, trk_key[1], hash(desc))
        log_gamma = gamma_poisson_log_eta(dens.gamma_alpha, dens.gamma_beta, len(sub), 1.0)
        post, lm = stick_update(dens, zs, 0, self.radar, cfg.noise, cfg.stick, rng=rng,
                                motion=cfg.reflector_motion)
        return post, lm + log_gamma


def predict_density(trk: TrackDensity, cfg: FilterConfig, rng: np.random.Generator):
    if trk.label.kind == OBJECT:
        return ggiw_predict(trk.density, cfg.motion)
    return stick_predict(trk.density, cfg.reflector_motion, cfg.stick, rng)


@dataclass
class RowTable:
    """Admissible row values of one label with their log weights.

    ``values[0]`` is death and ``values[1]`` the all-miss row; the rest
    assign subsets.  ``masks`` has bit ``s`` set when subset ``s`` is used.
    """

    label: Label
    values: List[Tuple[int, ...]]
    log_w: np.ndarray
    posteriors: List[object] = field(repr=False)
    descriptors: List[tuple] = field(repr=False)
    used: List[Tuple[int, ...]] = field(repr=False)
    is_birth: bool = False
    masks: np.ndarray = field(default=None, repr=False)


@dataclass
class AssociationTable:
    rows: List[RowTable]
    n_cols: int
    n_subsets: int
    track_keys: List[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        big = self.n_subsets > 62
        for row in self.rows:
            m = [_mask(v) for v in row.values]
            row.masks = np.array(m, dtype=object) if big else np.array(m, dtype=np.int64)

    @property
    def reflector_rows(self) -> np.ndarray:
        return np.array([r.label.kind == REFLECTOR for r in self.rows], dtype=bool)

    def initial(self) -> List[int]:
        """Existing labels alive and missed, births dead."""
        return [0 if r.is_birth else 1 for r in self.rows]

    def matrix(self, idx: Sequence[int]) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.n_cols), dtype=int)
        return np.array([r.values[i] for r, i in zip(self.rows, idx)], dtype=int)

    def indices(self, matrix) -> List[int]:
        m = np.asarray(matrix, dtype=int).reshape(len(self.rows), self.n_cols)
        out = []
        for row, vals in zip(self.rows, m):
            try:
                out.append(row.values.index(tuple(int(v) for v in vals)))
            except ValueError:
                raise ValueError(f"row {tuple(vals)} is not an admissible value for {row.label}") from None
        return out

    def log_weight(self, idx: Sequence[int]) -> float:
        return float(sum(r.log_w[i] for r, i in zip(self.rows, idx)))


def _mask(vals) -> int:
    m = 0
    for v in vals:
        if v > 0:
            m |= 1 << int(v)
    return m


def table_from_weights(weights: Sequence[Dict[Tuple[int, ...], float]], n_cols: int, n_subsets: int,
                       reflector_rows: Sequence[bool] = ()) -> AssociationTable:
    """Table from explicit ``{row value: weight}`` maps (testing and analysis).

    Each map must contain the death row (all -1) and the all-miss row.
    """
    rows = []
    refl = list(reflector_rows) + [False] * (len(weights) - len(reflector_rows))
    for i, wmap in enumerate(weights):
        death, miss = (-1,) * n_cols, (0,) * n_cols
        if death not in wmap or miss not in wmap:
            raise ValueError("each row needs death and all-miss values")
        vals = [death, miss] + [v for v in wmap if v not in (death, miss)]
        for v in vals:
            if len(v) != n_cols or any(e > n_subsets or e < -1 for e in v):
                raise ValueError(f"bad row value {v}")
        with np.errstate(divide="ignore"):
            lw = np.log(np.array([wmap[v] for v in vals], dtype=float))
        kind = REFLECTOR if refl[i] else OBJECT
        rows.append(RowTable(Label(0, i, kind), vals, lw, [None] * len(vals), [()] * len(vals),
                             [()] * len(vals)))
    return AssociationTable(rows, n_cols, n_subsets)


def _object_columns(pred, ctx: ScanContext, refl_labels) -> List[Tuple[int, Column, float]]:
    """(column index, column, detection probability) of active columns."""
    cfg = ctx.cfg
    cols = [(0, Column(DIRECT, 0), cfg.p_detect)]
    if not cfg.multipath_enabled:
        return cols
    nr = len(refl_labels)
    for m in geo.MULTIPATH:
        for j, lab in enumerate(refl_labels):
            line = ctx.lines.get(lab)
            if line is None or not geo.path_feasible(pred.mu[:2], ctx.radar, line, m):
                continue  # infeasible: structurally zero with P_dR = 0
            cols.append((1 + (m - 1) * nr + j, Column((m,) + lab.ints, m, line), cfg.p_detect_multipath))
    return cols


def _gate_object(pred, col: Column, partition, ctx: ScanContext, trk_key=None) -> List[int]:
    subs = list(range(1, len(partition) + 1))
    if ctx.cfg.gate_chi2 is None or not subs:
        return subs
    ck = (trk_key, col.key)
    hit = ctx._gate.get(ck) if trk_key is not None else None
    if hit is None:
        try:
            zhat, jac = predicted_measurement(pred, col.path, ctx.radar, col.line)
            rbar = measurement_cov(jac[:2, :2], expected_extent(pred), ctx.cfg.noise)
        except (TrackingError, np.linalg.LinAlgError):
            zhat, jac, rbar = None, None, None
        hit = (zhat, None if jac is None else jac @ pred.p_cov @ jac.T, rbar)
        if trk_key is not None:
            ctx._gate[ck] = hit
    zhat, jp, rbar = hit
    if zhat is None:
        return []
    d = np.array([ctx.centroid(sub) for sub in partition]) - zhat
    d[:, 1] = geo.wrap_angle(d[:, 1])
    n = np.array([len(sub) for sub in partition], dtype=float)
    lam = jp[None] + rbar[None] / n[:, None, None]
    maha = np.einsum("si,si->s", d, np.linalg.solve(lam, d[..., None])[..., 0])
    return [s for s, m in zip(subs, maha) if m <= ctx.cfg.gate_chi2]


def segment_support(pts: np.ndarray, a, b, gate: float) -> float:
    """Fraction of ``pts`` within ``gate`` of segment ``a``-``b`` extended by ``gate``."""
    if len(pts) == 0:
        return 0.0
    a, b = np.asarray(a, float), np.asarray(b, float)
    length = max(np.linalg.norm(b - a), 1e-9)
    u = (b - a) / length
    p = pts - a
    t = p @ u
    d = np.abs(p @ np.array([-u[1], u[0]]))
    return float(np.mean((d <= gate) & (t >= -gate) & (t <= length + gate)))


def _gate_reflector(pred, partition, ctx: ScanContext) -> List[int]:
    subs = list(range(1, len(partition) + 1))
    if ctx.cfg.gate_chi2 is None:
        return subs
    a, b = stick_endpoints(*stick_estimate(pred))
    g = ctx.cfg.reflector_gate
    return [s for s in subs if segment_support(ctx.cart[list(partition[s - 1])], a, b, g) >= 0.8]


def build_row(label: Label, trk_key, pred, p_exist: float, partition, ctx: ScanContext,
              refl_labels, n_cols: int, is_birth: bool) -> RowTable:
    """Enumerate the admissible values of one row with exact weights."""
    cfg = ctx.cfg
    if label.kind == OBJECT:
        active = _object_columns(pred, ctx, refl_labels)
    else:
        active = [(0, Column(DIRECT, 0), cfg.p_detect)]
    col_map = {c.key: c for _, c, _ in active}

    # candidate subsets per column, ranked by their single-column score
    cands = []
    for _, col, pd in active:
        gated = _gate_object(pred, col, partition, ctx, trk_key) if label.kind == OBJECT else _gate_reflector(pred, partition, ctx)
        scored = []
        for s in gated:
            sub = partition[s - 1]
            _, lm = ctx.eta(trk_key, label, pred, ((col.key, sub),), col_map)
            if lm == -np.inf or pd <= 0:
                continue
            scored.append((_log(pd) + lm - len(sub) * ctx.log_kappa + _set_factor(len(sub)) - _log1m(pd), s))
        scored.sort(key=lambda t: -t[0])
        if cfg.max_col_candidates is not None:
            scored = scored[:cfg.max_col_candidates]
        cands.append(scored)

    combos = _beam_combos(cands, cfg.max_row_values)

    log_pe = _log(p_exist)
    death = (-1,) * n_cols
    values, log_w, posts, descs, used = [death], [_log1m(p_exist)], [None], [None], [()]
    for asg in combos:
        row = [0] * n_cols
        desc, lw, meas = [], log_pe, []
        for (ci, col, pd), s in zip(active, asg):
            if s > 0:
                sub = partition[s - 1]
                row[ci] = s
                desc.append((col.key, sub))
                lw += _log(pd) - len(sub) * ctx.log_kappa + _set_factor(len(sub))
                meas.extend(sub)
            else:
                lw += _log1m(pd)
        desc = tuple(desc)
        post, lm = ctx.eta(trk_key, label, pred, desc, col_map)
        values.append(tuple(row))
        log_w.append(lw + lm)
        posts.append(post)
        descs.append(desc)
        used.append(tuple(sorted(meas)))
    return RowTable(label, values, np.array(log_w, dtype=float), posts, descs, used, is_birth)


def _beam_combos(cands, max_values: Optional[int]) -> List[Tuple[int, ...]]:
    """Column-wise product of ``{0} + candidates`` without repeated subsets.

    The all-miss combination comes first.  With ``max_values`` the partial
    products are pruned to the best ones by additive single-column score.
    """
    if max_values is None:
        out = []
        for asg in itertools.product(*[[0] + [s for _, s in c] for c in cands]):
            pos = [s for s in asg if s > 0]
            if len(pos) == len(set(pos)):
                out.append(asg)
        return out
    partial = [((), 0.0)]
    for col in cands:
        nxt = []
        for asg, sc in partial:
            nxt.append((asg + (0,), sc))
            for score, s in col:
                if s not in asg:
                    nxt.append((asg + (s,), sc + score))
        if len(nxt) > max_values:
            head, rest = nxt[0], nxt[1:]
            rest.sort(key=lambda t: -t[1])
            nxt = [head] + rest[:max_values - 1]
        partial = nxt
    return [asg for asg, _ in partial]


def association_weight_table(component: GlmbComponent, partition, ctx: ScanContext,
                             births: Sequence[BirthEntry] = ()) -> AssociationTable:
    """Rows for the component's labels (objects, then reflectors) and births."""
    cfg = ctx.cfg
    labels = component.labels
    existing = [l for l in labels if l.kind == OBJECT] + [l for l in labels if l.kind == REFLECTOR]
    refl = [l for l in labels if l.kind == REFLECTOR] if cfg.multipath_enabled else []
    n_cols = 3 * len(refl) + 1
    rows, keys = [], []
    for lab in existing:
        trk = component.tracks[lab]
        rows.append(build_row(lab, trk.key, ctx.predict(trk), cfg.p_survive, partition, ctx,
                              refl, n_cols, False))
        keys.append(trk.key)
    birth_objs = [b for b in births if b.label.kind == OBJECT]
    birth_refl = [b for b in births if b.label.kind == REFLECTOR]
    for b in birth_objs + birth_refl:
        trk, pred = birth_track(b, ctx)
        rows.append(build_row(b.label, trk.key, pred, b.r, partition, ctx, refl, n_cols, True))
        keys.append(trk.key)
    return AssociationTable(rows, n_cols, len(partition), keys)


def birth_history(label: Label) -> int:
    # integer-only tuples hash identically across interpreter runs
    return hash((-1,) + label.ints)


def birth_track(b: BirthEntry, ctx: ScanContext):
    """Birth as a track plus its density at the current scan time."""
    trk = TrackDensity(b.label, b.density, birth_history(b.label))
    pred = ctx.predict(trk) if b.predict else b.density
    return trk, pred
