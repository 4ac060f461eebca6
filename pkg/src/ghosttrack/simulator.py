"""Ground truth and radar measurement synthesis for the multipath scenarios.

Objects are ellipses moving at constant velocity with their major axis
along the velocity.  Each scan, every object is detected (or not) on each
feasible path; detected paths produce a Poisson number of scattering
centres drawn uniformly over the ellipse, all sharing the centroid
velocity.  The reflector returns direct-path points spread uniformly
along its segment, and uniform clutter fills the sensor region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import geometry as geo
from .ggiw import SensorNoise


@dataclass(frozen=True)
class ObjectSpec:
    initial: Tuple[float, float, float, float]
    length: float
    width: float
    rate: float
    birth: float
    death: float
    ident: int = 0

    def __post_init__(self):
        if not self.birth < self.death:
            raise ValueError("object birth must precede death")
        if self.rate <= 0 or self.length <= 0 or self.width <= 0:
            raise ValueError("object rate and dimensions must be positive")

    def alive(self, t: float) -> bool:
        return self.birth <= t + 1e-9 and t < self.death - 1e-9

    def state(self, t: float) -> np.ndarray:
        x = np.asarray(self.initial, dtype=float)
        return np.r_[x[:2] + x[2:] * (t - self.birth), x[2:]]

    @property
    def heading(self) -> float:
        v = np.asarray(self.initial[2:], dtype=float)
        return float(np.arctan2(v[1], v[0])) if np.linalg.norm(v) > 0 else 0.0


@dataclass(frozen=True)
class Occlusion:
    """Scale detection probabilities of ``paths`` for one object from ``start`` on."""

    ident: int
    start: float
    paths: Tuple[int, ...] = (0, 1)
    factor: float = 0.1
    end: Optional[float] = None

    def active(self, t: float) -> bool:
        return t >= self.start - 1e-9 and (self.end is None or t < self.end - 1e-9)


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float
    scan_rate: float
    radar: geo.RadarState
    reflector: Optional[geo.ReflectorLine]
    reflector_rate: float
    objects: Tuple[ObjectSpec, ...]
    noise: SensorNoise = SensorNoise()
    p_detect: float = 0.95
    p_detect_multipath: float = 0.9
    occlusions: Tuple[Occlusion, ...] = ()
    clutter_rate: float = 20.0
    clutter_region: Tuple[Tuple[float, float], ...] = ((0.0, 60.0), (-np.pi / 2, np.pi / 2), (-10.0, 10.0))
    name: str = "scenario"
    filter: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.duration <= 0 or self.scan_rate <= 0:
            raise ValueError("duration and scan rate must be positive")
        for o in self.objects:
            if o.death > self.duration + 1e-9:
                raise ValueError("object outlives the scenario")

    @property
    def dt(self) -> float:
        return 1.0 / self.scan_rate

    @property
    def n_scans(self) -> int:
        return int(round(self.duration * self.scan_rate))

    def times(self) -> np.ndarray:
        return np.arange(self.n_scans) * self.dt


@dataclass(frozen=True)
class TruthObject:
    ident: int
    kinematics: np.ndarray
    semi_axes: Tuple[float, float]
    heading: float

    @property
    def extent(self) -> np.ndarray:
        """Shape matrix ``R diag(a^2, b^2) R^T``."""
        c, s = np.cos(self.heading), np.sin(self.heading)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag(np.square(self.semi_axes)) @ rot.T


@dataclass(frozen=True)
class GroundTruthFrame:
    time: float
    objects: Tuple[TruthObject, ...]
    reflector: Optional[Tuple[np.ndarray, np.ndarray]]


def generate_truth(cfg: ScenarioConfig) -> List[GroundTruthFrame]:
    seg = (cfg.reflector.seg_start, cfg.reflector.seg_end) if cfg.reflector is not None else None
    frames = []
    for t in cfg.times():
        objs = tuple(TruthObject(o.ident, o.state(t), (o.length / 2.0, o.width / 2.0), o.heading)
                     for o in cfg.objects if o.alive(t))
        frames.append(GroundTruthFrame(float(t), objs, seg))
    return frames


def sample_ellipse(n: int, semi_axes, heading: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform points inside an ellipse centred at the origin (rejection sampling)."""
    a, b = semi_axes
    out = np.empty((0, 2))
    while len(out) < n:
        k = max(2 * (n - len(out)), 8)
        u = rng.uniform(-1.0, 1.0, size=(k, 2))
        out = np.vstack([out, u[np.sum(u ** 2, axis=1) <= 1.0]])
    p = out[:n] * np.array([a, b])
    c, s = np.cos(heading), np.sin(heading)
    return p @ np.array([[c, s], [-s, c]])


def _noisy(z: np.ndarray, noise: SensorNoise, rng: np.random.Generator) -> np.ndarray:
    z = z + rng.normal(size=z.shape) * np.array([noise.sigma_r, noise.sigma_phi, noise.sigma_rdot])
    z[:, 1] = geo.wrap_angle(z[:, 1])
    return z


def _detect_prob(cfg: ScenarioConfig, ident: int, path: int, t: float) -> float:
    p = cfg.p_detect if path == 0 else cfg.p_detect_multipath
    for occ in cfg.occlusions:
        if occ.ident == ident and path in occ.paths and occ.active(t):
            p *= occ.factor
    return p


def in_region(z: np.ndarray, region) -> np.ndarray:
    keep = np.ones(len(z), dtype=bool)
    for k, (lo, hi) in enumerate(region):
        keep &= (z[:, k] >= lo) & (z[:, k] <= hi)
    return keep


def generate_measurements(frame: GroundTruthFrame, cfg: ScenarioConfig, rng: np.random.Generator,
                          return_sources: bool = False):
    """One scan of ``(range, azimuth, doppler)`` rows.

    With ``return_sources`` a parallel ``(N, 2)`` array ``(source id, path)``
    is returned too; the reflector is source ``-1`` and clutter ``-2``.
    Returns outside the sensor region are dropped.
    """
    noise = cfg.noise
    chunks, srcs = [], []
    line = cfg.reflector
    for obj in frame.objects:
        pos, vel = obj.kinematics[:2], obj.kinematics[2:]
        for m in geo.PATHS:
            if m > 0 and (line is None or not geo.path_feasible(pos, cfg.radar, line, m)):
                continue
            if rng.random() >= _detect_prob(cfg, obj.ident, m, frame.time):
                continue
            spec = next(o for o in cfg.objects if o.ident == obj.ident)
            n = rng.poisson(noise.gamma_m[m] * spec.rate)
            if n == 0:
                continue
            pts = pos + sample_ellipse(n, obj.semi_axes, obj.heading, rng)
            z = geo.measure_array(m, pts, np.broadcast_to(vel, pts.shape), cfg.radar, line)
            chunks.append(_noisy(z, noise, rng))
            srcs.append(np.tile([obj.ident, m], (n, 1)))
    if line is not None and rng.random() < cfg.p_detect:
        n = rng.poisson(cfg.reflector_rate)
        if n:
            s = rng.uniform(0.0, 1.0, size=n)[:, None]
            pts = line.seg_start + s * (line.seg_end - line.seg_start)
            z = geo.measure_array(0, pts, np.zeros_like(pts), cfg.radar, None)
            chunks.append(_noisy(z, noise, rng))
            srcs.append(np.tile([-1, 0], (n, 1)))
    nc = rng.poisson(cfg.clutter_rate)
    if nc:
        lo = np.array([a for a, _ in cfg.clutter_region])
        hi = np.array([b for _, b in cfg.clutter_region])
        chunks.append(lo + rng.random((nc, 3)) * (hi - lo))
        srcs.append(np.tile([-2, 0], (nc, 1)))
    if not chunks:
        z, src = np.zeros((0, 3)), np.zeros((0, 2), dtype=int)
    else:
        z, src = np.vstack(chunks), np.vstack(srcs).astype(int)
        keep = in_region(z[:, :2], cfg.clutter_region[:2])
        z, src = z[keep], src[keep]
    return (z, src) if return_sources else z


def simulate(cfg: ScenarioConfig, rng: np.random.Generator):
    """Truth frames and one measurement array per scan."""
    truth = generate_truth(cfg)
    return truth, [generate_measurements(f, cfg, rng) for f in truth]
