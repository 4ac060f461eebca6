"""Scan-by-scan driver tying preprocessing, recursion, extraction and birth together."""
from __future__ import annotations

import dataclasses
from typing import List, Optional, Sequence

import numpy as np

from .. import geometry as geo
from ..preprocess import ScanPreprocess, preprocess_scan
from .birth import adaptive_birth, fixed_births
from .partition import prediction_partition, with_prediction_partition
from .recursion import extract_estimates, joint_predict_update, prune_and_cap, reflector_lines
from .types import OBJECT, REFLECTOR, BirthEntry, FilterConfig, GlmbDensity, Snapshot

VARIANTS = ("mpet-glmb", "mpet-glmb-fb", "glmb")


def variant_config(cfg: FilterConfig, variant: str, fixed_birth=None) -> FilterConfig:
    """Switch a base configuration to one of the filter variants.

    ``mpet-glmb`` uses adaptive births for objects and reflectors;
    ``mpet-glmb-fb`` fixed object births with adaptive reflector births;
    ``glmb`` fixed object births, no reflectors and no multipath.
    """
    if variant == "mpet-glmb":
        return dataclasses.replace(cfg, multipath_enabled=True, adaptive_object_birth=True,
                                   adaptive_reflector_birth=True, fixed_birth=None)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if not fixed_birth:
        raise ValueError(f"variant {variant!r} needs fixed birth components")
    mp = variant == "mpet-glmb-fb"
    return dataclasses.replace(cfg, multipath_enabled=mp, adaptive_object_birth=False,
                               adaptive_reflector_birth=mp, fixed_birth=tuple(fixed_birth))


class Tracker:
    """Stateful filter; call :meth:`step` once per scan with ``(N, 3)`` measurements."""

    def __init__(self, cfg: FilterConfig, radar: Optional[geo.RadarState] = None, seed: int = 0,
                 birth_scans: Optional[int] = None):
        self.cfg = cfg
        self.radar = radar or geo.RadarState(np.zeros(2), np.zeros(2))
        self.rng = np.random.default_rng(seed)
        self.birth_scans = birth_scans
        self.glmb = GlmbDensity.empty()
        self.lines = {}
        self.pending: List[BirthEntry] = []
        self.scan = 0
        self.last_preprocess: Optional[ScanPreprocess] = None

    def _births(self) -> List[BirthEntry]:
        if self.birth_scans is not None and self.scan >= self.birth_scans:
            return []
        return list(self.pending) + fixed_births(self.cfg, self.scan, start_index=len(self.pending))

    def step(self, z) -> Snapshot:
        cfg = self.cfg
        z = np.asarray(z, dtype=float).reshape(-1, 3)
        pre = preprocess_scan(z, cfg.hough, cfg.cluster_thresholds, cfg.max_partitions,
                              keep_reflector=cfg.multipath_enabled, radar_pos=self.radar.position)
        if cfg.prediction_partition and pre.partitions.partitions[0]:
            covered = sorted(i for sub in pre.partitions.partitions[0] for i in sub)
            extra = prediction_partition(self.glmb, z, pre.cartesian, covered, pre.reflector_idx,
                                         self.lines, self.radar, cfg)
            pre = dataclasses.replace(pre, partitions=with_prediction_partition(pre.partitions, extra))
        self.last_preprocess = pre
        post = joint_predict_update(self.glmb, z, pre.partitions, self.lines, self.radar, cfg,
                                    self.rng, births=self._births(), scan=self.scan)
        self.glmb = prune_and_cap(post, cfg)
        est = extract_estimates(self.glmb)
        self.lines = reflector_lines(self.glmb) if cfg.multipath_enabled else {}
        kinds = [k for k, on in ((OBJECT, cfg.adaptive_object_birth),
                                 (REFLECTOR, cfg.adaptive_reflector_birth and cfg.multipath_enabled)) if on]
        self.pending = adaptive_birth(post, pre, cfg, self.rng, self.scan + 1,
                                      kinds=kinds, lines=self.lines, radar=self.radar, z=z) if kinds else []
        self.scan += 1
        return est

    def run(self, scans: Sequence) -> List[Snapshot]:
        return [self.step(z) for z in scans]
