"""Four-path radar multipath geometry.

Paths are indexed 0..3:

* 0 -- direct, radar -> target -> radar
* 1 -- radar -> specular point -> target -> radar
* 2 -- radar -> target -> specular point -> radar
* 3 -- radar -> specular point -> target -> specular point -> radar

Path 3 behaves like a direct path to the target mirrored about the
reflector; paths 1 and 2 average range and Doppler of paths 0 and 3 and
copy the azimuth of path 0 and path 3 respectively.

Points and velocities are plain ``numpy`` arrays of shape ``(2,)`` (or
``(N, 2)`` for the vectorized helpers).  Measurements are ``[range,
azimuth, doppler]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateGeometry

PATHS = (0, 1, 2, 3)
MULTIPATH = (1, 2, 3)
_EPS_RANGE = 1e-9
_EPS_PARALLEL = 1e-12


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    if isinstance(a, (float, int, np.floating)):
        w = math.fmod(float(a) + math.pi, 2.0 * math.pi)
        w = (w + 2.0 * math.pi if w < 0 else w) - math.pi
        return math.pi if w == -math.pi else w
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def cross2(p, q):
    """Scalar 2-D cross product ``p_x q_y - p_y q_x`` (broadcasts)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]


@dataclass(frozen=True)
class ReflectorLine:
    """Planar reflector: infinite line through ``point_b`` with normal
    ``unit_normal``, physically present between ``seg_start`` and
    ``seg_end``."""

    point_b: np.ndarray
    unit_normal: np.ndarray
    seg_start: np.ndarray
    seg_end: np.ndarray

    def __post_init__(self):
        for name in ("point_b", "unit_normal", "seg_start", "seg_end"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))
        n = np.linalg.norm(self.unit_normal)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"unit_normal must have norm 1, got {n}")
        for p in (self.seg_start, self.seg_end):
            if abs(np.dot(p - self.point_b, self.unit_normal)) > 1e-6:
                raise ValueError("segment endpoints must lie on the reflector line")

    @classmethod
    def from_segment(cls, start, end) -> "ReflectorLine":
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        t = end - start
        length = np.linalg.norm(t)
        if length <= 0:
            raise DegenerateGeometry("zero-length reflector segment")
        t = t / length
        normal = np.array([t[1], -t[0]])
        return cls(0.5 * (start + end), normal, start, end)

    @property
    def tangent(self) -> np.ndarray:
        return np.array([-self.unit_normal[1], self.unit_normal[0]])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.seg_end - self.seg_start))


@dataclass(frozen=True)
class RadarState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(2))


@dataclass(frozen=True)
class Measurement:
    range: float
    azimuth: float
    doppler: float
    time: float = 0.0

    def __post_init__(self):
        if self.range < 0:
            raise ValueError("range must be non-negative")
        object.__setattr__(self, "azimuth", wrap_angle(self.azimuth))

    def as_array(self) -> np.ndarray:
        return np.array([self.range, self.azimuth, self.doppler])


def mirror_point(a, line: ReflectorLine):
    a = np.asarray(a, dtype=float)
    n = line.unit_normal
    d = (a - line.point_b) @ n
    return a - 2.0 * np.multiply.outer(d, n)


def mirror_velocity(v, line: ReflectorLine):
    v = np.asarray(v, dtype=float)
    n = line.unit_normal
    return v - 2.0 * np.multiply.outer(v @ n, n)


def specular_point(radar_pos, mirrored, line: ReflectorLine) -> Optional[np.ndarray]:
    """Intersection of the ray radar -> mirrored target with the reflector
    line, or ``None`` when the ray is parallel or points away."""
    o = np.asarray(radar_pos, dtype=float)
    oa = np.asarray(mirrored, dtype=float) - o
    ob = line.point_b - o
    ut = line.tangent
    den = cross2(oa, ut)
    if abs(den) < _EPS_PARALLEL:
        return None
    s1 = -cross2(oa, ob) / den
    s2 = cross2(ob, ut) / den
    if s2 < 0:
        return None
    return line.point_b + s1 * ut


def _segment_param(point, line: ReflectorLine) -> float:
    seg = line.seg_end - line.seg_start
    return float(np.dot(point - line.seg_start, seg) / np.dot(seg, seg))


def path_feasible(target_pos, radar: RadarState, line: Optional[ReflectorLine], m: int,
                  margin: float = 0.0) -> bool:
    """Whether path ``m`` exists for a target at ``target_pos``.

    Paths 1 and 2 reuse the path-3 specular point, so all three multipath
    paths are feasible together or not at all.
    """
    if m == 0:
        return True
    if m not in MULTIPATH:
        raise ValueError(f"invalid path id {m}")
    if line is None:
        return False
    a = np.asarray(target_pos, dtype=float)
    side_t = np.dot(a - line.point_b, line.unit_normal)
    side_o = np.dot(radar.position - line.point_b, line.unit_normal)
    if side_t * side_o <= 0.0:
        return False
    c = specular_point(radar.position, mirror_point(a, line), line)
    if c is None:
        return False
    t = _segment_param(c, line)
    lo = -margin / max(line.length, 1e-12)
    return lo <= t <= 1.0 - lo


def feasible_mask(target_pos, radar: RadarState, line: ReflectorLine, margin: float = 0.0):
    """Vectorized multipath feasibility for ``(N, 2)`` target positions."""
    a = np.atleast_2d(np.asarray(target_pos, dtype=float))
    n = line.unit_normal
    side_t = (a - line.point_b) @ n
    side_o = float(np.dot(radar.position - line.point_b, n))
    ok = side_t * side_o > 0.0
    o = radar.position
    oa = mirror_point(a, line) - o
    ob = line.point_b - o
    ut = line.tangent
    den = cross2(oa, ut)
    safe = np.abs(den) >= _EPS_PARALLEL
    den = np.where(safe, den, 1.0)
    s1 = -cross2(oa, ob[None, :]) / den
    s2 = cross2(ob, ut) / den
    c = line.point_b + np.multiply.outer(s1, ut)
    seg = line.seg_end - line.seg_start
    t = ((c - line.seg_start) @ seg) / np.dot(seg, seg)
    lo = -margin / max(line.length, 1e-12)
    return ok & safe & (s2 >= 0) & (t >= lo) & (t <= 1.0 - lo)


def _direct(pos, vel, radar: RadarState) -> np.ndarray:
    d = np.atleast_2d(pos) - radar.position
    r = np.hypot(d[:, 0], d[:, 1])
    if np.any(r < _EPS_RANGE):
        raise DegenerateGeometry("target coincides with radar position")
    phi = np.arctan2(d[:, 1], d[:, 0])
    dv = np.atleast_2d(vel) - radar.velocity
    rdot = np.sum(dv * d, axis=1) / r
    return np.column_stack([r, phi, rdot])


def measure_array(m: int, pos, vel, radar: RadarState,
                  line: Optional[ReflectorLine] = None) -> np.ndarray:
    """Noise-free measurements ``(N, 3)`` of points ``pos`` moving with
    ``vel`` via path ``m``.  Feasibility is not checked."""
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    vel = np.broadcast_to(np.asarray(vel, dtype=float), pos.shape)
    z0 = _direct(pos, vel, radar) if m != 3 else None
    if m == 0:
        return z0
    if line is None:
        raise DegenerateGeometry(f"path {m} requires a reflector")
    z3 = _direct(mirror_point(pos, line), mirror_velocity(vel, line), radar)
    if m == 3:
        return z3
    r1 = 0.5 * (z0[:, 0] + z3[:, 0])
    rd1 = 0.5 * (z0[:, 2] + z3[:, 2])
    if m == 1:
        return np.column_stack([r1, z0[:, 1], rd1])
    if m == 2:
        return np.column_stack([r1, z3[:, 1], rd1])
    raise ValueError(f"invalid path id {m}")


def measure(m: int, target_pos, target_vel, radar: RadarState,
            line: Optional[ReflectorLine] = None, time: float = 0.0) -> Measurement:
    z = measure_array(m, target_pos, target_vel, radar, line)[0]
    return Measurement(float(z[0]), float(z[1]), float(z[2]), time)


def _unit(phi):
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def _solve_two_leg(s, c, w):
    """Solve ``t + |c + t w| = s`` for ``t`` (``w`` unit vectors)."""
    den = 2.0 * (s + np.sum(c * w, axis=-1))
    num = s * s - np.sum(c * c, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
    bad = (den <= 0) | (t < 0) | (t > s)
    return t, bad


def inverse_position_array(rng, az, radar: RadarState, line: Optional[ReflectorLine], m: int):
    """Target positions ``(N, 2)`` whose path-``m`` (range, azimuth) equal
    the given values."""
    rng = np.atleast_1d(np.asarray(rng, dtype=float))
    az = np.atleast_1d(np.asarray(az, dtype=float))
    o = radar.position
    if m == 0:
        return o + rng[:, None] * _unit(az)
    if line is None:
        raise DegenerateGeometry(f"path {m} requires a reflector")
    if m == 3:
        return mirror_point(o + rng[:, None] * _unit(az), line)
    o_m = mirror_point(o, line)
    c = np.broadcast_to(o_m - o, (rng.size, 2))
    s = 2.0 * rng
    if m == 1:
        # direct range r0 along az; r3 = |o' - o + r0 u'| with u' mirrored
        w = mirror_velocity(_unit(az), line)
        r0, bad = _solve_two_leg(s, c, w)
        if np.any(bad):
            raise DegenerateGeometry("no path-1 inverse for this measurement")
        return o + r0[:, None] * _unit(az)
    if m == 2:
        w = mirror_velocity(_unit(az), line)
        r3, bad = _solve_two_leg(s, c, w)
        if np.any(bad):
            raise DegenerateGeometry("no path-2 inverse for this measurement")
        return mirror_point(o + r3[:, None] * _unit(az), line)
    raise ValueError(f"invalid path id {m}")


def inverse_position(rng: float, az: float, radar: RadarState,
                     line: Optional[ReflectorLine], m: int) -> np.ndarray:
    if rng <= 0:
        raise DegenerateGeometry("range must be positive")
    return inverse_position_array(rng, az, radar, line, m)[0]


def _direct_jacobian(x, radar: RadarState) -> np.ndarray:
    d = x[:2] - radar.position
    r2 = d @ d
    r = np.sqrt(r2)
    if r < _EPS_RANGE:
        raise DegenerateGeometry("range is zero")
    u = d / r
    dv = x[2:4] - radar.velocity
    rdot = dv @ u
    jac = np.zeros((3, 4))
    jac[0, :2] = u
    jac[1, :2] = np.array([-d[1], d[0]]) / r2
    jac[2, :2] = (dv - rdot * u) / r
    jac[2, 2:] = u
    return jac


def measurement_jacobian(m: int, x, radar: RadarState,
                         line: Optional[ReflectorLine] = None) -> np.ndarray:
    """Jacobian ``(3, 4)`` of the path-``m`` measurement with respect to the
    kinematic state ``[px, py, vx, vy]``."""
    x = np.asarray(x, dtype=float)
    if m == 0:
        return _direct_jacobian(x, radar)
    if line is None:
        raise DegenerateGeometry(f"path {m} requires a reflector")
    n = line.unit_normal
    refl = np.eye(2) - 2.0 * np.outer(n, n)
    xm = np.concatenate([mirror_point(x[:2], line), refl @ x[2:4]])
    j3 = _direct_jacobian(xm, radar)
    j3[:, :2] = j3[:, :2] @ refl
    j3[:, 2:] = j3[:, 2:] @ refl
    if m == 3:
        return j3
    j0 = _direct_jacobian(x, radar)
    out = np.empty((3, 4))
    out[0] = 0.5 * (j0[0] + j3[0])
    out[2] = 0.5 * (j0[2] + j3[2])
    out[1] = j0[1] if m == 1 else j3[1]
    return out
