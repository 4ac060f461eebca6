import csv
import json

import numpy as np
import pytest
import yaml

from ghosttrack import cli, io
from ghosttrack.errors import ParseError
from ghosttrack.glmb import REFLECTOR, Label, TrackEstimate
from ghosttrack.runner import RunManifest, metrics_from_files, run_many, run_scenario
from ghosttrack.scenario import builtin_path, load_scenario
from ghosttrack.stick import StickExtent


@pytest.fixture(scope="module")
def short_scenario(tmp_path_factory):
    """Scenario 1 cut to its first two seconds (object 1 only)."""
    doc = yaml.safe_load(builtin_path("scenario1").read_text())
    doc["duration"] = 2.0
    doc["objects"] = [dict(doc["objects"][0], birth=0.2, death=2.0)]
    doc["occlusions"] = []
    p = tmp_path_factory.mktemp("scn") / "short.yaml"
    p.write_text(yaml.safe_dump(doc))
    return p


def _write(tmp_path, lines):
    p = tmp_path / "m.jsonl"
    p.write_text("".join(l + "\n" for l in lines))
    return p


def test_measurement_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    scans = [rng.uniform(0, 10, size=(n, 3)) for n in (3, 0, 5)]
    times = [0.0, 0.2, 0.4]
    p = tmp_path / "m.jsonl"
    io.write_measurements(p, scans, times)
    back, t = io.read_measurements(p)
    # the trailing record decides the scan count; the empty middle scan is a gap
    assert len(back) == 3 and back[1].shape == (0, 3)
    assert all(np.array_equal(a, b) for a, b in zip(scans, back))
    assert t == pytest.approx(times)


def test_empty_file_has_no_scans(tmp_path):
    assert io.read_measurements(_write(tmp_path, [])) == ([], [])
    assert io.read_measurements(_write(tmp_path, ["", "  "])) == ([], [])


def rec(scan=0, time=0.0, r=5.0, az=0.1, rd=0.0, **kw):
    d = {"scan": scan, "time": time, "range": r, "azimuth": az, "doppler": rd}
    d.update(kw)
    return json.dumps(d)


@pytest.mark.parametrize("lines, line_no", [
    ([rec(1, 0.2), rec(0, 0.0)], 2),
    (["{not json"], 1),
    (["[1, 2]"], 1),
    ([json.dumps({"scan": 0, "time": 0.0, "range": 1.0, "azimuth": 0.0})], 1),
    ([rec(r=-1.0)], 1),
    ([rec(scan=-1)], 1),
    ([rec(scan=0.5)], 1),
    ([rec(r="far")], 1),
    ([rec(r=True)], 1),
    ([rec(0, 0.0), rec(0, 0.1)], 2),
    ([rec(), '{"scan": 0, "time": 0.0, "range": NaN, "azimuth": 0, "doppler": 0}'], 2),
])
def test_measurement_parse_errors(tmp_path, lines, line_no):
    with pytest.raises(ParseError) as err:
        io.read_measurements(_write(tmp_path, lines))
    assert err.value.line == line_no and f"line {line_no}" in str(err.value)


def test_gap_scans_get_interpolated_times(tmp_path):
    scans, times = io.read_measurements(_write(tmp_path, [rec(0, 0.0), rec(3, 0.6)]))
    assert [len(s) for s in scans] == [1, 0, 0, 1]
    assert times == pytest.approx([0.0, 0.2, 0.4, 0.6])


def test_jsonl_and_frames(tmp_path):
    recs = [{"run": 0, "scan": 0, "label": "1.0", "kind": "object", "x": 1.0, "y": 2.0},
            {"run": 0, "scan": 1, "label": "1.0", "kind": "object", "x": 1.5, "y": 2.0},
            {"run": 1, "scan": 1, "label": "2.0", "kind": "object", "x": 0.0, "y": 0.0},
            {"run": 0, "scan": 1, "label": "3.0", "kind": REFLECTOR, "x": 9.0, "y": 9.0},
            {"run": 0, "scan": 7, "label": "1.0", "kind": "object", "x": 0.0, "y": 0.0}]
    p = tmp_path / "t.jsonl"
    io.write_jsonl(p, recs)
    assert io.read_jsonl(p) == recs
    fr = io.frames_from_records(recs, 2)
    assert sorted(fr) == [0, 1]
    assert list(fr[0][1]) == ["1.0"] and np.allclose(fr[0][1]["1.0"], [1.5, 2.0])
    assert fr[1][0] == {}
    p.write_text('{"a": 1}\n{oops\n')
    with pytest.raises(ParseError):
        io.read_jsonl(p)


def test_track_records():
    obj = TrackEstimate(Label(3, 1), np.array([1.0, 2.0, 3.0, 4.0]), np.array([[2.0, 0.5], [0.5, 1.0]]), 9.0)
    r = io.track_record(2, 5, 1.0000000001, obj)
    assert r["label"] == "3.1" and r["kind"] == "object" and r["extent"] == [2.0, 0.5, 1.0]
    assert r["time"] == 1.0 and r["run"] == 2 and r["scan"] == 5
    refl = TrackEstimate(Label(0, 0, REFLECTOR), np.array([20.0, 15.0, 0, 0]), StickExtent(0.0, -15, 15), 80.0)
    assert io.track_record(0, 0, 0.0, refl)["extent"] == [0.0, -15.0, 15.0]


def test_manifest_validation():
    with pytest.raises(ValueError):
        RunManifest("scenario1", runs=0)
    with pytest.raises(ValueError):
        RunManifest("scenario1", workers=0)


def test_run_is_byte_identical(tmp_path, short_scenario, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["run", "--scenario", str(short_scenario), "--runs", "2", "--seed", "4",
                         "--out", str(out)]) == 0
        outs.append(out)
    for f in ("summary.csv", "per_scan.csv", "tracks.jsonl", "truth.jsonl"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    printed = capsys.readouterr().out.strip().splitlines()
    assert printed[0].startswith("variant,runs,ospa")
    with open(outs[0] / "per_scan.csv") as fh:
        assert len(list(csv.reader(fh))) == 1 + 10


def test_workers_do_not_change_results(short_scenario):
    scn = load_scenario(short_scenario)
    one = run_many(scn, "mpet-glmb", 2, seed=1, workers=1)
    two = run_many(scn, "mpet-glmb", 2, seed=1, workers=2)
    for a, b in zip(one, two):
        assert a.tracks == b.tracks and np.array_equal(a.ospa, b.ospa)


def test_metrics_command_reproduces_summary(tmp_path, short_scenario, capsys):
    out = tmp_path / "run"
    summary = run_scenario(RunManifest(str(short_scenario), "mpet-glmb", 2, 3, str(out)))
    again = metrics_from_files(out, out / "truth.jsonl")
    for k in ("ospa", "ospa2", "mota", "motp", "hausdorff"):
        assert again[k] == pytest.approx(summary[k], abs=1e-12, nan_ok=True)
    for k in ("tp", "fp", "fn", "ids"):
        assert again[k] == summary[k]
    assert cli.main(["metrics", "--est", str(out), "--truth", str(out / "truth.jsonl")]) == 0
    row = capsys.readouterr().out.strip().splitlines()[-1].split(",")
    assert row[0] == "file" and float(row[2]) == pytest.approx(summary["ospa"], abs=1e-6)


def test_ingest_command(tmp_path, short_scenario, capsys):
    from ghosttrack.simulator import simulate
    scn = load_scenario(short_scenario)
    truth, scans = simulate(scn, np.random.default_rng(0))
    meas = tmp_path / "meas.jsonl"
    io.write_measurements(meas, scans, [f.time for f in truth])
    assert cli.main(["ingest", "--input", str(meas), "--out", str(tmp_path / "o"),
                     "--scenario", str(short_scenario)]) == 0
    recs = io.read_jsonl(tmp_path / "o" / "tracks.jsonl")
    assert recs and max(r["scan"] for r in recs) <= len(scans) - 1
    assert "10 scans" in capsys.readouterr().out


def test_cli_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.yaml")]) == 2
    bad = _write(tmp_path, [rec(1, 0.2), rec(0, 0.0)])
    assert cli.main(["ingest", "--input", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["metrics", "--est", str(tmp_path / "x.jsonl"), "--truth", str(tmp_path / "y.jsonl")]) == 2
    assert "track: error:" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--scenario", "scenario1", "--variant", "kalman"])
    assert exc.value.code == 2
    assert cli.main(["run", "--scenario", "scenario1", "--runs", "0"]) == 2
