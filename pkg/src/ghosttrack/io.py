"""Line-delimited JSON readers and writers for measurements, truth and track dumps."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ParseError
from .glmb.types import OBJECT, TrackEstimate
from .stick import StickExtent

MEAS_FIELDS = ("scan", "time", "range", "azimuth", "doppler")


def write_measurements(path, scans: Sequence[np.ndarray], times: Sequence[float]) -> None:
    with open(path, "w") as fh:
        for k, (z, t) in enumerate(zip(scans, times)):
            for r, phi, rd in np.asarray(z, dtype=float).reshape(-1, 3):
                fh.write(json.dumps({"scan": k, "time": float(t), "range": float(r),
                                     "azimuth": float(phi), "doppler": float(rd)}) + "\n")


def _number(rec, key, lineno, kind=float):
    if key not in rec:
        raise ParseError(f"missing field {key!r}", lineno)
    val = rec[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"field {key!r} must be numeric", lineno)
    if kind is int:
        if int(val) != val:
            raise ParseError(f"field {key!r} must be an integer", lineno)
        return int(val)
    if not np.isfinite(val):
        raise ParseError(f"field {key!r} must be finite", lineno)
    return float(val)


def read_measurements(path) -> Tuple[List[np.ndarray], List[float]]:
    """Per-scan ``(N, 3)`` arrays and scan times from a measurement file.

    Scan indices must be non-decreasing and start at or above 0; gaps give
    empty scans.  Blank lines are skipped.
    """
    scans: List[list] = []
    times: List[float] = []
    last = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(rec, dict):
                raise ParseError("record must be an object", lineno)
            k = _number(rec, "scan", lineno, int)
            t = _number(rec, "time", lineno)
            r, phi, rd = (_number(rec, f, lineno) for f in MEAS_FIELDS[2:])
            if k < last:
                raise ParseError(f"scan {k} after scan {last}", lineno)
            if k < 0:
                raise ParseError("negative scan index", lineno)
            if r < 0:
                raise ParseError("negative range", lineno)
            while len(scans) <= k:
                scans.append([])
                times.append(np.nan)
            if np.isnan(times[k]):
                times[k] = t
            elif times[k] != t:
                raise ParseError(f"scan {k} has inconsistent times", lineno)
            scans[k].append((r, phi, rd))
            last = k
    # empty gap scans inherit a time by linear fill
    tt = np.array(times, dtype=float)
    if len(tt) and np.isnan(tt).any():
        ok = ~np.isnan(tt)
        tt = np.interp(np.arange(len(tt)), np.flatnonzero(ok), tt[ok])
    return [np.array(s, dtype=float).reshape(-1, 3) for s in scans], [float(x) for x in tt]


def label_str(label) -> str:
    return f"{label.birth_time}.{label.birth_index}"


def track_record(run: int, scan: int, time: float, est: TrackEstimate) -> Dict:
    kin = np.asarray(est.kinematics, dtype=float)
    rec = {"run": run, "scan": scan, "time": round(float(time), 9), "label": label_str(est.label),
           "kind": est.kind, "x": float(kin[0]), "y": float(kin[1]), "vx": float(kin[2]), "vy": float(kin[3]),
           "rate": float(est.rate)}
    if est.kind == OBJECT:
        e = np.asarray(est.extent, dtype=float)
        rec["extent"] = [float(e[0, 0]), float(e[0, 1]), float(e[1, 1])]
    else:
        e = est.extent.as_array() if isinstance(est.extent, StickExtent) else np.asarray(est.extent, dtype=float)
        rec["extent"] = [float(v) for v in e]
    return rec


def write_jsonl(path, records: Iterable[Dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> List[Dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
    return out


def frames_from_records(records: Sequence[Dict], n_scans: int, kind: str = OBJECT, key: str = "label"
                        ) -> Dict[int, List[Dict]]:
    """Per-run lists of ``{label: position}`` frames from dump records."""
    runs: Dict[int, List[Dict]] = {}
    for rec in records:
        if rec.get("kind", kind) != kind:
            continue
        frames = runs.setdefault(int(rec.get("run", 0)), [dict() for _ in range(n_scans)])
        k = int(rec["scan"])
        if 0 <= k < n_scans:
            frames[k][rec[key]] = np.array([rec["x"], rec["y"]], dtype=float)
    return runs


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
