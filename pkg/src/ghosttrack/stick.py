"""Uniform-stick reflector model carried by a weighted particle set.

A reflector is a line segment anchored at ``C0 = x_K[:2]`` with extent
``[heading, start, end]``; the endpoints sit at ``C0 + start*u`` and
``C0 + end*u`` with ``u = [cos h, sin h]``.  Particles are stored as
arrays for speed; :class:`StickParticle` views are produced on demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfc, logsumexp

from . import geometry as geo
from .errors import AllWeightsZero
from .ggiw import MotionConfig, SensorNoise

MIN_LENGTH = 0.1
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class StickExtent:
    heading: float
    start_off: float
    end_off: float

    def __post_init__(self):
        if not self.start_off < self.end_off:
            raise ValueError("stick extent needs start_off < end_off")

    def as_array(self) -> np.ndarray:
        return np.array([self.heading, self.start_off, self.end_off])


@dataclass(frozen=True)
class StickParticle:
    kinematics: np.ndarray
    extent: StickExtent
    weight: float


@dataclass(frozen=True)
class StickConfig:
    particle_count: int = 400
    eff_threshold: float = 200.0
    sigma_heading: float = np.deg2rad(0.5)
    sigma_start: float = 0.3
    sigma_end: float = 0.3
    jitter_scale: float = 0.5
    resample: bool = True

    def __post_init__(self):
        if self.particle_count < 1:
            raise ValueError("particle_count must be positive")
        if not 0.0 < self.eff_threshold <= self.particle_count:
            raise ValueError("eff_threshold must lie in (0, particle_count]")

    @property
    def extent_std(self) -> np.ndarray:
        return np.array([self.sigma_heading, self.sigma_start, self.sigma_end])


@dataclass(frozen=True)
class StickParticleSet:
    """Arrays ``kin (L, 4)``, ``ext (L, 3)`` and normalized ``weights (L,)``."""

    kin: np.ndarray = field(repr=False)
    ext: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    gamma_alpha: float = 1.0
    gamma_beta: float = 1.0

    def __post_init__(self):
        kin = np.atleast_2d(np.asarray(self.kin, dtype=float))
        ext = np.atleast_2d(np.asarray(self.ext, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if kin.shape != (w.size, 4) or ext.shape != (w.size, 3):
            raise ValueError("particle arrays have inconsistent shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("particle weights must be nonnegative and sum to one")
        if self.gamma_alpha <= 0 or self.gamma_beta <= 0:
            raise ValueError("gamma parameters must be positive")
        object.__setattr__(self, "kin", kin)
        object.__setattr__(self, "ext", ext)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def particles(self):
        return [StickParticle(self.kin[i].copy(), StickExtent(*self.ext[i]), float(self.weights[i]))
                for i in range(len(self))]

    @classmethod
    def from_particles(cls, particles, gamma_alpha, gamma_beta):
        kin = np.array([p.kinematics for p in particles], dtype=float)
        ext = np.array([p.extent.as_array() for p in particles], dtype=float)
        w = np.array([p.weight for p in particles], dtype=float)
        return cls(kin, ext, w / w.sum(), gamma_alpha, gamma_beta)


def _ordered(ext: np.ndarray) -> np.ndarray:
    """Swap start/end where noise inverted them and wrap headings."""
    ext = ext.copy()
    swap = ext[:, 1] > ext[:, 2]
    ext[swap, 1:] = ext[swap][:, [2, 1]]
    ext[:, 0] = geo.wrap_angle(ext[:, 0])
    return ext


def stick_endpoints(kinematics, extent):
    """Segment endpoints ``(C_start, C_end)``."""
    e = extent.as_array() if isinstance(extent, StickExtent) else np.asarray(extent, dtype=float)
    c0 = np.asarray(kinematics, dtype=float)[:2]
    u = np.array([np.cos(e[0]), np.sin(e[0])])
    return c0 + e[1] * u, c0 + e[2] * u


def stick_line(kinematics, extent) -> geo.ReflectorLine:
    """Reflector line for multipath geometry from a stick state."""
    return geo.ReflectorLine.from_segment(*stick_endpoints(kinematics, extent))


def stick_predict(pset: StickParticleSet, motion: MotionConfig, cfg: StickConfig,
                  rng: np.random.Generator) -> StickParticleSet:
    f = motion.transition()
    q = motion.process_cov()
    n = len(pset)
    kin = pset.kin @ f.T
    if np.any(q):
        kin = kin + rng.multivariate_normal(np.zeros(4), q, size=n, method="eigh")
    ext = pset.ext + rng.normal(size=(n, 3)) * cfg.extent_std
    return StickParticleSet(kin, _ordered(ext), pset.weights.copy(),
                            pset.gamma_alpha / motion.epsilon, pset.gamma_beta / motion.epsilon)


def _q(x):
    return 0.5 * erfc(x / _SQRT2)


def _log_bracket(a, b):
    """``log(Q(a) - Q(b))`` for ``a <= b``, evaluated on the side with
    the smaller tail to keep precision."""
    upper = a > 0
    lower = b < 0
    mid = ~(upper | lower)
    out = np.empty(np.broadcast(a, b).shape)
    with np.errstate(divide="ignore"):
        out[upper] = np.log(np.maximum(_q(a[upper]) - _q(b[upper]), 0.0))
        out[lower] = np.log(np.maximum(_q(-b[lower]) - _q(-a[lower]), 0.0))
        out[mid] = np.log(np.maximum(1.0 - _q(-a[mid]) - _q(b[mid]), 0.0))
    return out


def meas_cartesian(z: np.ndarray, path: int, radar: geo.RadarState, noise: SensorNoise,
                   line: Optional[geo.ReflectorLine] = None):
    """Inverse-mapped positions ``(N, 2)``, covariances ``(N, 2, 2)`` and
    ``log|d(x, y)/d(r, phi)|`` per measurement."""
    z = np.atleast_2d(z)
    pos = geo.inverse_position_array(z[:, 0], z[:, 1], radar, line, path)
    rn = np.diag([noise.sigma_r ** 2, noise.sigma_phi ** 2])
    if path == 0:
        c, s = np.cos(z[:, 1]), np.sin(z[:, 1])
        jac = np.stack([np.stack([c, -z[:, 0] * s], -1), np.stack([s, z[:, 0] * c], -1)], 1)
        return pos, jac @ rn @ np.swapaxes(jac, 1, 2), np.log(z[:, 0])
    covs = np.empty((len(z), 2, 2))
    logdet = np.empty(len(z))
    for i, p in enumerate(pos):
        hi = np.linalg.inv(geo.measurement_jacobian(path, np.r_[p, 0.0, 0.0], radar, line)[:2, :2])
        covs[i] = hi @ rn @ hi.T
        logdet[i] = np.log(abs(np.linalg.det(hi)))
    return pos, covs, logdet


def stick_log_likelihood(kin: np.ndarray, ext: np.ndarray, z: np.ndarray, path: int,
                         radar: geo.RadarState, noise: SensorNoise,
                         line: Optional[geo.ReflectorLine] = None) -> np.ndarray:
    """Per-measurement, per-particle log likelihoods ``(N, L)``.

    The density is over ``(range, azimuth, doppler)``, i.e. the Cartesian
    stick density times the polar-to-Cartesian Jacobian, so it can be
    compared against clutter and GGIW likelihoods.
    """
    z = np.atleast_2d(z)
    zxy, rxy, logjac = meas_cartesian(z, path, radar, noise, line)
    rdot_hat = geo.measure_array(path, kin[:, :2], kin[:, 2:], radar, line)[:, 2]
    ut = np.stack([np.cos(ext[:, 0]), np.sin(ext[:, 0])], -1)
    un = np.stack([-ut[:, 1], ut[:, 0]], -1)
    dz = zxy[:, None, :] - kin[None, :, :2]
    d_n = np.einsum("nld,ld->nl", dz, un)
    mu_t = np.einsum("nld,ld->nl", dz, ut)
    var_n = np.einsum("ld,nde,le->nl", un, rxy, un)
    sd_t = np.sqrt(np.einsum("ld,nde,le->nl", ut, rxy, ut))
    length = np.maximum(ext[:, 2] - ext[:, 1], MIN_LENGTH)
    res = z[:, 2:3] - rdot_hat[None, :]
    ll = (-0.5 * (res / noise.sigma_rdot) ** 2 - np.log(noise.sigma_rdot * np.sqrt(2 * np.pi))
          - 0.5 * d_n ** 2 / var_n - 0.5 * np.log(2 * np.pi * var_n) - np.log(length)[None, :])
    ll += logjac[:, None]
    ll += _log_bracket((ext[None, :, 1] - mu_t) / sd_t, (ext[None, :, 2] - mu_t) / sd_t)
    return ll


def stick_update(pset: StickParticleSet, meas_set, path: int, radar: geo.RadarState,
                 noise: SensorNoise, cfg: StickConfig, rng: Optional[np.random.Generator] = None,
                 line: Optional[geo.ReflectorLine] = None, motion: Optional[MotionConfig] = None):
    """Sequentially reweight by every measurement in the set.

    The per-measurement normalizers telescope, so the log marginal is the
    log-sum of prior weights times the joint likelihood.  Resampling, if
    due, happens once after the whole set.
    """
    from .ggiw import _as_meas_array  # local to avoid exporting a private helper

    z = _as_meas_array(meas_set)
    if z.shape[0] < 1:
        raise ValueError("measurement set must be non-empty")
    ll = stick_log_likelihood(pset.kin, pset.ext, z, path, radar, noise, line)
    with np.errstate(divide="ignore"):
        logw = np.log(pset.weights)
    cum = logw + ll.sum(axis=0)
    log_marg = logsumexp(cum)
    if not np.isfinite(log_marg):
        raise AllWeightsZero("no particle explains the measurement set")
    w = np.exp(cum - log_marg)
    w /= w.sum()
    post = StickParticleSet(pset.kin, pset.ext, w,
                            pset.gamma_alpha + z.shape[0], pset.gamma_beta + noise.gamma_m[path])
    if cfg.resample and 1.0 / np.sum(w ** 2) < cfg.eff_threshold:
        if rng is None:
            raise ValueError("resampling requires an rng")
        post = stick_resample(post, cfg, rng, batch=(z, path, radar, noise, line), motion=motion)
    return post, float(log_marg)


def systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.size
    pos = (rng.random() + np.arange(n)) / n
    cs = np.cumsum(weights)
    cs[-1] = 1.0
    return np.searchsorted(cs, pos, side="right")


def stick_resample(pset: StickParticleSet, cfg: StickConfig, rng: np.random.Generator,
                   batch=None, motion: Optional[MotionConfig] = None) -> StickParticleSet:
    """Systematic resampling followed by one Metropolis-Hastings jitter.

    ``batch = (z, path, radar, noise, line)`` supplies the likelihood the
    random-walk move is accepted against; without it only resampling is done.
    """
    idx = systematic_indices(pset.weights, rng)
    kin = pset.kin[idx].copy()
    ext = pset.ext[idx].copy()
    n = idx.size
    if batch is not None:
        z, path, radar, noise, line = batch
        q = (motion or MotionConfig(sigma_x=0.05, sigma_y=0.05)).process_cov()
        s = cfg.jitter_scale
        kin_p = kin + s * rng.multivariate_normal(np.zeros(4), q, size=n, method="eigh")
        ext_p = _ordered(ext + s * rng.normal(size=(n, 3)) * cfg.extent_std)
        ll_old = stick_log_likelihood(kin, ext, z, path, radar, noise, line).sum(0)
        ll_new = stick_log_likelihood(kin_p, ext_p, z, path, radar, noise, line).sum(0)
        with np.errstate(invalid="ignore"):
            acc = np.log(rng.random(n)) < ll_new - ll_old
        kin[acc] = kin_p[acc]
        ext[acc] = ext_p[acc]
    return StickParticleSet(kin, ext, np.full(n, 1.0 / n), pset.gamma_alpha, pset.gamma_beta)


def stick_estimate(pset: StickParticleSet):
    """Weighted mean kinematics and extent; heading via the mean unit vector."""
    w = pset.weights
    kin = w @ pset.kin
    h = np.arctan2(w @ np.sin(pset.ext[:, 0]), w @ np.cos(pset.ext[:, 0]))
    s, e = w @ pset.ext[:, 1], w @ pset.ext[:, 2]
    if not s < e:
        e = s + MIN_LENGTH
    return kin, StickExtent(float(h), float(s), float(e))


def stick_from_gaussian(mean_kin, kin_cov, mean_ext, ext_std, cfg: StickConfig,
                        rng: np.random.Generator, gamma_alpha: float, gamma_beta: float):
    """Fresh equally weighted particle set drawn around a mean state."""
    n = cfg.particle_count
    kin = rng.multivariate_normal(np.asarray(mean_kin, float), kin_cov, size=n, method="eigh")
    ext = np.asarray(mean_ext, float) + rng.normal(size=(n, 3)) * np.asarray(ext_std, float)
    return StickParticleSet(kin, _ordered(ext), np.full(n, 1.0 / n), gamma_alpha, gamma_beta)
