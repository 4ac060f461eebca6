"""Monte Carlo orchestration: simulate, filter, score, aggregate."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import io
from .errors import EmptyPosterior, RuntimeFailure
from .glmb import REFLECTOR, Tracker
from .glmb.types import OBJECT
from .metrics import MetricConfig, clear_mot, hausdorff_segment, ospa2, ospa_per_scan
from .scenario import birth_scans, filter_config, load_scenario
from .simulator import ScenarioConfig, simulate
from .stick import stick_endpoints

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ("variant", "runs", "ospa", "ospa2", "mota", "motp", "tp", "fp", "fn", "ids", "hausdorff")


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    variant: str = "mpet-glmb"
    runs: int = 1
    seed: int = 0
    out: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class RunResult:
    run: int
    ospa: np.ndarray
    ospa2: np.ndarray
    mot: object
    hausdorff: float
    tracks: List[Dict]
    truth: List[Dict]
    seconds: float


def run_seeds(seed: int, run: int):
    """Independent simulation and filter seeds for one run."""
    ss = np.random.SeedSequence([int(seed), int(run)])
    sim, filt = ss.spawn(2)
    return np.random.default_rng(sim), int(filt.generate_state(1, dtype=np.uint64)[0] >> 1)


def truth_records(run: int, scn: ScenarioConfig, truth) -> List[Dict]:
    out = []
    for k, fr in enumerate(truth):
        for o in fr.objects:
            e = o.extent
            out.append({"run": run, "scan": k, "time": round(fr.time, 9), "label": int(o.ident), "kind": OBJECT,
                        "x": float(o.kinematics[0]), "y": float(o.kinematics[1]),
                        "vx": float(o.kinematics[2]), "vy": float(o.kinematics[3]),
                        "extent": [float(e[0, 0]), float(e[0, 1]), float(e[1, 1])]})
    if scn.reflector is not None:
        a, b = scn.reflector.seg_start, scn.reflector.seg_end
        out.append({"run": run, "scan": len(truth) - 1, "kind": REFLECTOR, "label": -1,
                    "start": [float(a[0]), float(a[1])], "end": [float(b[0]), float(b[1])]})
    return out


def final_hausdorff(estimates, segment) -> float:
    """Smallest Hausdorff distance of any reflector estimate to the true segment (nan if none)."""
    if segment is None:
        return float("nan")
    d = [hausdorff_segment(stick_endpoints(e.kinematics, e.extent), segment)
         for e in estimates if e.kind == REFLECTOR]
    return float(min(d)) if d else float("nan")


def score(est_frames, truth_frames, mc: MetricConfig):
    return (ospa_per_scan(est_frames, truth_frames, mc.ospa_cutoff, mc.ospa_order),
            ospa2(est_frames, truth_frames, mc.ospa_cutoff, mc.ospa_order, mc.ospa2_window),
            clear_mot(est_frames, truth_frames, mc.mot_threshold))


def run_single(scn: ScenarioConfig, variant: str, seed: int, run: int,
               mc: MetricConfig = MetricConfig(), **overrides) -> RunResult:
    """Simulate and filter one Monte Carlo run."""
    cfg = filter_config(scn, variant, **overrides)
    sim_rng, filt_seed = run_seeds(seed, run)
    truth, scans = simulate(scn, sim_rng)
    trk = Tracker(cfg, scn.radar, seed=filt_seed, birth_scans=birth_scans(scn))
    tracks, est_frames, truth_frames = [], [], []
    last = ()
    t0 = time.perf_counter()
    for k, (fr, z) in enumerate(zip(truth, scans)):
        try:
            last = trk.step(z)
        except EmptyPosterior as exc:
            raise RuntimeFailure(f"scan {k}: {exc}", run=run) from exc
        tracks.extend(io.track_record(run, k, fr.time, e) for e in last)
        est_frames.append({io.label_str(e.label): e.position for e in last if e.kind == OBJECT})
        truth_frames.append({o.ident: o.kinematics[:2] for o in fr.objects})
    secs = time.perf_counter() - t0
    seg = None if scn.reflector is None else (scn.reflector.seg_start, scn.reflector.seg_end)
    o1, o2, mot = score(est_frames, truth_frames, mc)
    return RunResult(run, o1, o2, mot, final_hausdorff(last, seg), tracks,
                     truth_records(run, scn, truth), secs)


def _job(args):
    scn, variant, seed, run, overrides = args
    return run_single(scn, variant, seed, run, **overrides)


def run_many(scn: ScenarioConfig, variant: str, runs: int, seed: int = 0, workers: int = 1,
             **overrides) -> List[RunResult]:
    """All runs in index order; with ``workers > 1`` they execute in a process pool."""
    jobs = [(scn, variant, seed, r, overrides) for r in range(runs)]
    if workers == 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def summarize(variant: str, results: Sequence[RunResult]) -> Dict:
    mots = [r.mot for r in results]
    n_truth = sum(m.n_truth for m in mots)
    fp, fn, ids = (sum(getattr(m, f) for m in mots) for f in ("fp", "fn", "ids"))
    tp = sum(m.tp for m in mots)
    motp = [m.motp for m in mots if m.tp]
    return {
        "variant": variant, "runs": len(results),
        "ospa": float(np.mean([r.ospa.mean() for r in results])),
        "ospa2": float(np.mean([r.ospa2.mean() for r in results])),
        "mota": 1.0 - (fp + fn + ids) / n_truth if n_truth else 1.0,
        "motp": float(np.mean(motp)) if motp else float("nan"),
        "tp": tp, "fp": fp, "fn": fn, "ids": ids,
        "hausdorff": float(np.nanmean([r.hausdorff for r in results]))
        if any(np.isfinite(r.hausdorff) for r in results) else float("nan"),
    }


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def write_outputs(out, scn: ScenarioConfig, variant: str, results: Sequence[RunResult]) -> Dict:
    out = io.ensure_dir(out)
    summary = summarize(variant, results)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        w.writerow([_fmt(summary[f]) for f in SUMMARY_FIELDS])
    o1 = np.mean([r.ospa for r in results], axis=0)
    o2 = np.mean([r.ospa2 for r in results], axis=0)
    with open(out / "per_scan.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("scan", "time", "ospa", "ospa2"))
        for k, t in enumerate(scn.times()):
            w.writerow((k, _fmt(float(t)), _fmt(float(o1[k])), _fmt(float(o2[k]))))
    io.write_jsonl(out / "tracks.jsonl", (rec for r in results for rec in r.tracks))
    io.write_jsonl(out / "truth.jsonl", (rec for r in results for rec in r.truth))
    return summary


def run_scenario(manifest: RunManifest) -> Dict:
    scn = load_scenario(manifest.scenario)
    results = run_many(scn, manifest.variant, manifest.runs, manifest.seed, manifest.workers)
    for r in results:
        log.info("run %d: %.1f scans/s", r.run, len(r.ospa) / max(r.seconds, 1e-9))
    if manifest.out is None:
        return summarize(manifest.variant, results)
    return write_outputs(manifest.out, scn, manifest.variant, results)


def metrics_from_files(est_path, truth_path, mc: MetricConfig = MetricConfig()) -> Dict:
    """Score a track dump against a truth file; both are line-delimited records."""
    est_path = Path(est_path)
    if est_path.is_dir():
        est_path = est_path / "tracks.jsonl"
    est = io.read_jsonl(est_path)
    truth = io.read_jsonl(truth_path)
    n_scans = 1 + max([int(r["scan"]) for r in truth + est] or [-1])
    tf = io.frames_from_records(truth, n_scans)
    ef = io.frames_from_records(est, n_scans)
    results = []
    segs = {int(r.get("run", 0)): (np.array(r["start"]), np.array(r["end"]))
            for r in truth if r.get("kind") == REFLECTOR}
    for run in sorted(tf):
        frames = ef.get(run, [dict() for _ in range(n_scans)])
        o1, o2, mot = score(frames, tf[run], mc)
        hd = float("nan")
        if run in segs:
            refl = [r for r in est if int(r.get("run", 0)) == run and r["kind"] == REFLECTOR
                    and int(r["scan"]) == n_scans - 1]
            d = [hausdorff_segment(stick_endpoints([r["x"], r["y"], r["vx"], r["vy"]], r["extent"]), segs[run])
                 for r in refl]
            hd = min(d) if d else float("nan")
        results.append(RunResult(run, o1, o2, mot, hd, [], [], 0.0))
    return summarize("file", results)
