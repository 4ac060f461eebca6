"""Measurement-driven and fixed birth models."""
from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .. import geometry as geo
from ..ggiw import GgiwDensity, ggiw_estimate
from ..preprocess import ScanPreprocess, to_cartesian
from ..stick import stick_from_gaussian
from .kernels import segment_support
from .recursion import map_component
from .types import OBJECT, REFLECTOR, BirthEntry, FilterConfig, FixedBirth, GlmbDensity, Label


def unexplained_fraction(posterior: GlmbDensity, subsets: Sequence[tuple]) -> np.ndarray:
    """``1 - sum_h w_h |W & used_h| / |W|`` for each candidate subset ``W``.

    Partial overlap counts proportionally, so a cluster merging a tracked
    object with a few extra points is still mostly explained.
    """
    out = np.ones(len(subsets))
    for j, sub in enumerate(subsets):
        s = set(sub)
        used = sum(c.weight * len(s & c.used) for c in posterior.components)
        out[j] = 1.0 - used / len(s)
    return np.clip(out, 0.0, 1.0)


def birth_probability(r_tilde, cfg: FilterConfig):
    b = cfg.birth
    r_tilde = np.asarray(r_tilde, dtype=float)
    return np.where(r_tilde > b.r_bmin, b.r_bmax * r_tilde, 0.0)


def _sample_cov(pts: np.ndarray) -> np.ndarray:
    return np.cov(pts.T) if len(pts) > 1 else np.zeros((2, 2))


def object_birth_density(pts: np.ndarray, cfg: FilterConfig) -> GgiwDensity:
    """GGIW centred on the points with extent mean ``C_W / rho``.

    Extent eigenvalues are floored at ``extent_floor`` so thin or tiny
    clusters still get a usable ellipse.
    """
    b = cfg.birth
    n = len(pts)
    w, v = np.linalg.eigh(_sample_cov(pts) / cfg.noise.rho_scale)
    ext = v @ np.diag(np.maximum(w, b.extent_floor)) @ v.T
    return GgiwDensity(alpha=n * n / b.gamma_var, beta=n / b.gamma_var,
                       mu=np.r_[pts.mean(axis=0), 0.0, 0.0], p_cov=b.p_cov,
                       nu=b.nu_b, v_scale=(b.nu_b - 3.0) * ext)


def reflector_birth_density(pts: np.ndarray, cfg: FilterConfig, rng: np.random.Generator):
    """Stick particles around the principal axis of the points.

    The half-length is that of a uniform segment with the same variance,
    ``sqrt(3 * lambda_max)``.
    """
    b = cfg.birth
    n = len(pts)
    w, v = np.linalg.eigh(_sample_cov(pts))
    u = v[:, -1]
    half = np.sqrt(3.0 * max(w[-1], 0.0))
    g = cfg.motion.noise_gain()
    q = g @ np.diag([cfg.motion.sigma_x ** 2, cfg.motion.sigma_y ** 2]) @ g.T
    return stick_from_gaussian(np.r_[pts.mean(axis=0), 0.0, 0.0], q,
                               [np.arctan2(u[1], u[0]), -half, half],
                               [np.sqrt(b.heading_var), b.end_std, b.end_std],
                               cfg.stick, rng, n * n / b.gamma_var, n / b.gamma_var)


def _semi_axis(pts: np.ndarray, cfg: FilterConfig) -> float:
    return float(np.sqrt(max(np.linalg.eigvalsh(_sample_cov(pts) / cfg.noise.rho_scale)[-1], 0.0)))


def _on_tracked_line(pts: np.ndarray, lines, cfg: FilterConfig) -> bool:
    return any(segment_support(pts, ln.seg_start, ln.seg_end, cfg.reflector_gate) >= cfg.birth.majority
               for ln in (lines or {}).values())


def ghost_images(pos, radar: geo.RadarState, lines) -> np.ndarray:
    """Cartesian positions where the bounce paths of a source at ``pos`` appear.

    Only the existence of a specular point is required; the finite segment
    is ignored since estimated endpoints lag the true ones.
    """
    pos = np.asarray(pos, dtype=float)
    out = []
    for ln in (lines or {}).values():
        side = (pos - ln.point_b) @ ln.unit_normal
        if side * ((radar.position - ln.point_b) @ ln.unit_normal) <= 0:
            continue
        if geo.specular_point(radar.position, geo.mirror_point(pos, ln), ln) is None:
            continue
        for m in geo.MULTIPATH:
            zm = geo.measure_array(m, pos, np.zeros(2), radar, ln)
            out.append(to_cartesian(zm, radar.position)[0])
    return np.array(out).reshape(-1, 2)


def _inside_tracked(centroid, tracked, scale: float) -> bool:
    """True when ``centroid`` lies inside a tracked object's extent ellipse grown by ``scale``."""
    for mu, ext in tracked:
        d = centroid - mu[:2]
        if d @ np.linalg.solve(ext, d) <= scale ** 2:
            return True
    return False


def _is_ghost(centroid, sources, radar, lines, radius: float) -> bool:
    return any(np.any(np.linalg.norm(ghost_images(src, radar, lines) - centroid, axis=1) <= radius)
               for src in sources)


def adaptive_birth(posterior: GlmbDensity, pre: ScanPreprocess, cfg: FilterConfig,
                   rng: np.random.Generator, birth_time: int, start_index: int = 0,
                   kinds: Sequence[str] = (OBJECT, REFLECTOR), lines=None,
                   radar: Optional[geo.RadarState] = None, z=None) -> List[BirthEntry]:
    """Birth Bernoullis from the current scan's unexplained subsets.

    Candidates are the distinct subsets over all partitions.  Subsets made
    mostly (fraction ``majority``) of line-gated stationary returns spawn
    reflectors from those returns, mostly moving ones spawn objects from
    the moving returns, and mixed ones nothing.  Among overlapping candidates
    the largest is kept, so a single cluster yields at most one birth.
    Reflector candidates lying on an already tracked line (``lines``, label
    to :class:`ReflectorLine`) are dropped; that track should absorb them.
    Object candidates centred inside a MAP object's extent ellipse (grown
    by ``duplicate_scale``) would split that object and are dropped.
    Object candidates whose centroid sits within ``ghost_radius`` of a
    bounce image of a MAP object or of a larger accepted candidate are
    treated as ghosts and dropped too (needs ``radar``).  Given the scan
    ``z``, object candidates whose Doppler spread exceeds ``doppler_std``
    are dropped; one rigid body's returns share a velocity, clutter does not.
    """
    b = cfg.birth
    subsets = pre.partitions.subsets()
    if not subsets:
        return []
    r_b = birth_probability(unexplained_fraction(posterior, subsets), cfg)
    refl_set = set(int(i) for i in pre.reflector_idx)
    move_set = set(int(i) for i in pre.moving)

    cands = []
    for sub, r in zip(subsets, r_b):
        if r <= 0:
            continue
        still = tuple(i for i in sub if i in refl_set)
        moving = tuple(i for i in sub if i in move_set)
        if len(still) >= b.majority * len(sub):
            kind, pts_idx = REFLECTOR, still
        elif len(moving) >= b.majority * len(sub):
            kind, pts_idx = OBJECT, moving
        else:
            continue
        if kind not in kinds or len(pts_idx) < b.min_meas:
            continue
        if kind == REFLECTOR and _on_tracked_line(pre.cartesian[list(pts_idx)], lines, cfg):
            continue
        if kind == OBJECT and _semi_axis(pre.cartesian[list(pts_idx)], cfg) > b.max_semi_axis:
            continue
        if kind == OBJECT and z is not None and np.std(z[list(pts_idx), 2]) > b.doppler_std:
            continue
        cands.append((sub, pts_idx, float(r), kind))
    cands.sort(key=lambda t: -len(t[0]))

    comp = map_component(posterior)
    tracked = [] if comp is None else [ggiw_estimate(t.density)[1:] for lab, t in comp.tracks.items()
                                       if lab.kind == OBJECT]
    sources = [mu[:2] for mu, _ in tracked] if radar is not None and lines else []

    taken, out = set(), []
    for sub, pts_idx, r, kind in cands:
        if taken.intersection(sub):
            continue
        pts = pre.cartesian[list(pts_idx)]
        if kind == OBJECT and _inside_tracked(pts.mean(axis=0), tracked, b.duplicate_scale):
            continue
        if kind == OBJECT and sources and _is_ghost(pts.mean(axis=0), sources, radar, lines, b.ghost_radius):
            continue
        taken.update(sub)
        lab = Label(birth_time, start_index + len(out), kind)
        if kind == OBJECT:
            dens = object_birth_density(pts, cfg)
            tracked.append(ggiw_estimate(dens)[1:])
            if radar is not None and lines:
                sources.append(pts.mean(axis=0))
        else:
            dens = reflector_birth_density(pts, cfg, rng)
        out.append(BirthEntry(lab, r, dens, predict=True))
    return out


def fixed_births(cfg: FilterConfig, birth_time: int, start_index: int = 0) -> List[BirthEntry]:
    """Configured birth components, already at the birth scan's time."""
    if not cfg.fixed_birth:
        return []
    return [BirthEntry(Label(birth_time, start_index + i, OBJECT), fb.r, fb.density, predict=False)
            for i, fb in enumerate(cfg.fixed_birth)]


def fixed_birth_density(position, expected_extent, rate: float, cfg: FilterConfig,
                        velocity=(0.0, 0.0)) -> GgiwDensity:
    """GGIW birth component with mean extent ``expected_extent`` and mean rate ``rate``."""
    b = cfg.birth
    return GgiwDensity(alpha=rate * rate / b.gamma_var, beta=rate / b.gamma_var,
                       mu=np.r_[np.asarray(position, float), np.asarray(velocity, float)],
                       p_cov=b.p_cov, nu=b.nu_b,
                       v_scale=(b.nu_b - 3.0) * np.asarray(expected_extent, dtype=float))


def make_fixed_birth(specs: Optional[Sequence[dict]], cfg: FilterConfig):
    """``FixedBirth`` tuple from ``{r, position, extent, rate}`` mappings."""
    if not specs:
        return None
    return tuple(FixedBirth(float(s["r"]), fixed_birth_density(s["position"], s["extent"], s["rate"], cfg))
                 for s in specs)
