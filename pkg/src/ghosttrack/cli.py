"""``track`` command line: run scenarios, filter recorded measurements, score dumps."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import io
from .errors import TrackingError
from .glmb import VARIANTS, Tracker
from .runner import SUMMARY_FIELDS, RunManifest, metrics_from_files, run_scenario, _fmt
from .scenario import birth_scans, filter_config, load_scenario


def _print_summary(summary) -> None:
    print(",".join(SUMMARY_FIELDS))
    print(",".join(_fmt(summary[f]) for f in SUMMARY_FIELDS))


def cmd_run(args) -> int:
    manifest = RunManifest(args.scenario, args.variant, args.runs, args.seed, args.out, args.workers)
    _print_summary(run_scenario(manifest))
    return 0


def cmd_ingest(args) -> int:
    scans, times = io.read_measurements(args.input)
    scn = load_scenario(args.scenario)
    trk = Tracker(filter_config(scn, args.variant), scn.radar, seed=args.seed, birth_scans=birth_scans(scn))
    out = io.ensure_dir(args.out)
    recs = []
    for k, (z, t) in enumerate(zip(scans, times)):
        recs.extend(io.track_record(0, k, t, e) for e in trk.step(z))
    io.write_jsonl(out / "tracks.jsonl", recs)
    print(f"{len(scans)} scans, {len(recs)} track records -> {out / 'tracks.jsonl'}")
    return 0


def cmd_metrics(args) -> int:
    _print_summary(metrics_from_files(args.est, args.truth))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="track", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo runs of a scenario")
    r.add_argument("--scenario", required=True, help="YAML file or built-in name (scenario1, scenario2)")
    r.add_argument("--variant", default="mpet-glmb", choices=VARIANTS)
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=None)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("ingest", help="filter a recorded measurement file")
    g.add_argument("--input", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--scenario", default="scenario1", help="sensor and filter settings to use")
    g.add_argument("--variant", default="mpet-glmb", choices=VARIANTS)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_ingest)

    m = sub.add_parser("metrics", help="score a track dump against truth")
    m.add_argument("--est", required=True, help="tracks.jsonl or a directory holding it")
    m.add_argument("--truth", required=True)
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TrackingError, ValueError, OSError) as exc:
        print(f"track: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
