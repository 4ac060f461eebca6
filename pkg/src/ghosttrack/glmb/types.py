"""Labels, hypotheses and filter configuration for the labeled multi-Bernoulli core."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from scipy.stats import chi2

from ..ggiw import GgiwDensity, MotionConfig, SensorNoise
from ..preprocess import HoughConfig
from ..stick import StickConfig, StickExtent, StickParticleSet

OBJECT = "object"
REFLECTOR = "reflector"
KINDS = (OBJECT, REFLECTOR)

Density = Union[GgiwDensity, StickParticleSet]


@dataclass(frozen=True, order=True)
class Label:
    """Track identity; ordering and equality use ``(birth_time, birth_index)`` only."""

    birth_time: int
    birth_index: int
    kind: str = field(default=OBJECT, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")

    @property
    def ints(self) -> Tuple[int, int]:
        return (int(self.birth_time), int(self.birth_index))


@dataclass(frozen=True)
class TrackDensity:
    label: Label
    density: Density
    history: int

    def __post_init__(self):
        want = GgiwDensity if self.label.kind == OBJECT else StickParticleSet
        if not isinstance(self.density, want):
            raise TypeError(f"{self.label.kind} label needs a {want.__name__}")

    @property
    def key(self):
        return (self.label, self.history)


@dataclass(frozen=True)
class GlmbComponent:
    """One hypothesis: a label set with its track densities and weight.

    ``used`` holds the measurement indices this hypothesis assigned to
    tracks in the scan that produced it (consumed by adaptive birth).
    """

    weight: float
    tracks: Mapping[Label, TrackDensity]
    used: frozenset = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0 + 1e-12:
            raise ValueError("component weight outside [0, 1]")
        for lab, trk in self.tracks.items():
            if trk.label != lab:
                raise ValueError("track map keyed by the wrong label")

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(sorted(self.tracks))

    @property
    def key(self):
        return tuple(self.tracks[l].key for l in self.labels)

    def __len__(self):
        return len(self.tracks)


@dataclass(frozen=True)
class GlmbDensity:
    components: Tuple[GlmbComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.components:
            total = sum(c.weight for c in self.components)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"component weights sum to {total}, not 1")
        keys = [c.key for c in self.components]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate hypotheses")

    @classmethod
    def empty(cls) -> "GlmbDensity":
        return cls((GlmbComponent(1.0, {}),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class BirthEntry:
    """Labeled Bernoulli birth; ``predict`` says whether the density is
    still at the previous scan's time and needs one prediction."""

    label: Label
    r: float
    density: Density
    predict: bool = True

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("birth probability outside [0, 1]")


@dataclass(frozen=True)
class FixedBirth:
    r: float
    density: GgiwDensity


@dataclass(frozen=True)
class BirthConfig:
    r_bmax: float = 1.0
    r_bmin: float = 0.5
    gamma_var: float = 25.0
    nu_b: float = 10.0
    p_b: Tuple[float, ...] = (1.0, 1.0, 4.0, 4.0)
    heading_var: float = 0.03
    end_std: float = 1.0
    min_meas: int = 5
    majority: float = 0.8
    max_semi_axis: float = 3.0
    extent_floor: float = 0.25
    ghost_radius: float = 2.0
    duplicate_scale: float = 1.5
    doppler_std: float = 1.5

    def __post_init__(self):
        if not 0.0 <= self.r_bmin < self.r_bmax <= 1.0:
            raise ValueError("need 0 <= r_bmin < r_bmax <= 1")
        if self.gamma_var <= 0 or self.nu_b <= 3 or len(self.p_b) != 4:
            raise ValueError("bad birth density parameters")

    @property
    def p_cov(self) -> np.ndarray:
        return np.diag(self.p_b)


@dataclass(frozen=True)
class FilterConfig:
    p_survive: float = 0.99
    p_detect: float = 0.95
    p_detect_multipath: float = 0.9
    clutter_rate: float = 20.0
    clutter_region: Tuple[Tuple[float, float], ...] = ((0.0, 60.0), (-np.pi / 2, np.pi / 2), (-10.0, 10.0))
    h_max: int = 100
    w_min: float = 1e-4
    birth: BirthConfig = BirthConfig()
    multipath_enabled: bool = True
    fixed_birth: Optional[Tuple[FixedBirth, ...]] = None
    adaptive_object_birth: bool = True
    adaptive_reflector_birth: bool = True
    motion: MotionConfig = MotionConfig()
    reflector_motion: MotionConfig = MotionConfig(sigma_x=0.1, sigma_y=0.1)
    noise: SensorNoise = SensorNoise()
    stick: StickConfig = StickConfig()
    hough: HoughConfig = HoughConfig()
    cluster_thresholds: Tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    max_partitions: int = 8
    prediction_partition: bool = True
    gate_chi2: Optional[float] = float(chi2.ppf(0.9999, 3))
    reflector_gate: float = 3.0
    max_col_candidates: Optional[int] = 3
    max_row_values: Optional[int] = 64

    def __post_init__(self):
        for p in (self.p_survive, self.p_detect, self.p_detect_multipath):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.h_max < 1 or self.w_min < 0 or self.clutter_rate < 0:
            raise ValueError("bad budget or clutter parameters")
        if len(self.clutter_region) != 3 or any(b <= a for a, b in self.clutter_region):
            raise ValueError("clutter region needs (range, azimuth, doppler) intervals")

    @property
    def clutter_volume(self) -> float:
        return float(np.prod([b - a for a, b in self.clutter_region]))


@dataclass(frozen=True)
class TrackEstimate:
    label: Label
    kinematics: np.ndarray
    extent: Union[np.ndarray, StickExtent]
    rate: float

    @property
    def kind(self) -> str:
        return self.label.kind

    @property
    def position(self) -> np.ndarray:
        return self.kinematics[:2]


Snapshot = Tuple[TrackEstimate, ...]
