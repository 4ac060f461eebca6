"""YAML scenario files: sensor, reflector, objects, clutter and filter sections."""
from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from . import geometry as geo
from .errors import ConfigError, DegenerateGeometry
from .ggiw import SensorNoise
from .glmb.birth import make_fixed_birth
from .glmb.tracker import variant_config
from .glmb.types import BirthConfig, FilterConfig
from .simulator import ObjectSpec, Occlusion, ScenarioConfig

BUILTIN = ("scenario1", "scenario2")


def builtin_path(name: str) -> Path:
    if name not in BUILTIN:
        raise ConfigError(f"unknown built-in scenario {name!r}")
    return Path(str(resources.files("ghosttrack") / "scenarios" / f"{name}.yaml"))


def _vec(x, n, what):
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.size != n or not np.all(np.isfinite(a)):
        raise ConfigError(f"{what} must be {n} finite numbers")
    return a


def _section(doc, key, required=True):
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError(f"missing section {key!r}")
        return {}
    if not isinstance(val, (dict, list)):
        raise ConfigError(f"section {key!r} must be a mapping or list")
    return val


def parse_scenario(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must hold a mapping")
    try:
        sen = _section(doc, "sensor")
        radar = geo.RadarState(_vec(sen.get("position", [0, 0]), 2, "sensor.position"),
                               _vec(sen.get("velocity", [0, 0]), 2, "sensor.velocity"))
        noise = SensorNoise(float(sen.get("sigma_r", 0.2)), np.deg2rad(float(sen.get("sigma_phi_deg", 0.5))),
                            float(sen.get("sigma_rdot", 0.5)), float(sen.get("rho_scale", 0.25)),
                            tuple(sen.get("gamma_m", (1.0, 0.6, 0.6, 0.6))))
        ref = _section(doc, "reflector", required=False)
        line, rrate = None, 0.0
        if ref:
            c = _vec(ref["center"], 2, "reflector.center")
            h = np.deg2rad(float(ref.get("heading_deg", 0.0)))
            half = 0.5 * float(ref["length"]) * np.array([np.cos(h), np.sin(h)])
            line = geo.ReflectorLine.from_segment(c - half, c + half)
            rrate = float(ref["rate"])
        objs = []
        for i, o in enumerate(_section(doc, "objects")):
            dims = _vec(o["dimensions"], 2, "object dimensions")
            objs.append(ObjectSpec(tuple(_vec(o["initial"], 4, "object initial state")), dims[0], dims[1],
                                   float(o["rate"]), float(o["birth"]), float(o["death"]),
                                   int(o.get("id", i + 1))))
        occ = tuple(Occlusion(int(o["object"]), float(o["start"]), tuple(int(p) for p in o.get("paths", (0, 1))),
                              float(o.get("factor", 0.1)), None if o.get("end") is None else float(o["end"]))
                    for o in (doc.get("occlusions") or []))
        clu = _section(doc, "clutter")
        region = (tuple(clu.get("range", (0.0, 60.0))),
                  tuple(np.deg2rad(clu.get("azimuth_deg", (-90.0, 90.0)))),
                  tuple(clu.get("doppler", (-10.0, 10.0))))
        region = tuple((float(a), float(b)) for a, b in region)
        return ScenarioConfig(
            duration=float(doc["duration"]), scan_rate=float(doc.get("scan_rate", 5.0)), radar=radar,
            reflector=line, reflector_rate=rrate, objects=tuple(objs), noise=noise,
            p_detect=float(sen.get("p_detect", 0.95)), p_detect_multipath=float(sen.get("p_detect_multipath", 0.9)),
            occlusions=occ, clutter_rate=float(clu.get("rate", 20.0)), clutter_region=region,
            name=str(doc.get("name", "scenario")), filter=dict(doc.get("filter") or {}))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, DegenerateGeometry) as exc:
        raise ConfigError(f"bad scenario: {exc!r}") from exc


def load_scenario(source: Union[str, Path]) -> ScenarioConfig:
    """Scenario from a YAML path or a built-in name (``scenario1``, ``scenario2``)."""
    path = builtin_path(str(source)) if str(source) in BUILTIN else Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_scenario(doc)


def filter_config(scn: ScenarioConfig, variant: str = "mpet-glmb", **overrides) -> FilterConfig:
    """Filter configuration matching the scenario's sensor, switched to ``variant``."""
    f = dict(scn.filter)
    birth_kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in (f.get("birth") or {}).items()}
    base = FilterConfig(
        p_detect=scn.p_detect, p_detect_multipath=scn.p_detect_multipath,
        clutter_rate=scn.clutter_rate, clutter_region=scn.clutter_region, noise=scn.noise,
        birth=BirthConfig(**birth_kw),
    )
    base = dataclasses.replace(base, motion=dataclasses.replace(base.motion, dt=scn.dt),
                               reflector_motion=dataclasses.replace(base.reflector_motion, dt=scn.dt))
    for k in ("p_survive", "h_max", "w_min", "max_partitions"):
        if k in f:
            base = dataclasses.replace(base, **{k: f[k]})
    fixed = make_fixed_birth(f.get("fixed_birth"), base)
    cfg = variant_config(base, variant, fixed)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def birth_scans(scn: ScenarioConfig) -> Optional[int]:
    v = scn.filter.get("birth_scans")
    return None if v is None else int(v)
