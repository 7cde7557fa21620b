import json
import os
import subprocess
import sys

import pytest

from skycat import htm
from skycat.cli import main
from skycat.generator import GeneratorSpec, generate_synthetic


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_htm_lookup_cli(capsys):
    code, out, _ = run(capsys, "htm", "lookup", "45", "45", "6")
    assert code == 0
    assert int(out.strip()) == htm.htm_lookup_radec(45, 45, 6)


def test_htm_cover_cli(capsys):
    code, out, _ = run(capsys, "htm", "cover", "--circle", "45", "45", "1", "6")
    assert code == 0
    lines = out.strip().splitlines()
    ranges = [tuple(map(int, ln.split())) for ln in lines]
    assert ranges == htm.cover(htm.circle_to_region(45, 45, 1), 6)


def test_filterql_check_cli(capsys):
    code, out, _ = run(capsys, "filterql", "check", "(r-g)>1")
    assert code == 0 and "bool" in out
    code, out, _ = run(capsys, "filterql", "check", "(r-g)>>1")
    assert code == 2 and "^" in out


def test_generate_load_events_undo_audit_cycle(tmp_path, capsys):
    gen = tmp_path / "gen"
    data = tmp_path / "data"
    code, out, _ = run(
        capsys, "generate", "--objects", "300", "--plates", "1",
        "--seed", "3", "--out", str(gen),
    )
    assert code == 0
    manifest = json.loads((gen / "manifest.json").read_text(encoding="utf-8"))

    for table in manifest["loadOrder"]:
        code, out, _ = run(
            capsys, "--data", str(data), "load", table,
            str(gen / manifest["files"][table]),
        )
        assert code == 0, out

    code, out, _ = run(capsys, "--data", str(data), "events")
    assert code == 0
    events = [json.loads(ln) for ln in out.strip().splitlines()]
    assert len(events) == len(manifest["loadOrder"])
    assert all(e["status"] == "success" for e in events)

    code, out, _ = run(capsys, "--data", str(data), "events", "--table", "Field")
    assert code == 0
    assert all(json.loads(ln)["tableName"] == "Field" for ln in out.strip().splitlines())

    # audit the snapshot file
    snap = data / "catalog.snapshot"
    code, out, _ = run(capsys, "store", "audit", str(snap))
    assert code == 0 and out.strip() == ""

    # undo the PhotoObj load (nothing references it yet)
    photo_eid = [e for e in events if e["tableName"] == "PhotoObj"][0]["eventID"]
    code, out, _ = run(capsys, "--data", str(data), "undo", str(photo_eid))
    assert code == 0 and "undone" in out

    # a second undo of the same event is a validation failure
    code, out, err = run(capsys, "--data", str(data), "undo", str(photo_eid))
    assert code == 2

    # undoing a load with dependents reports the dependency exit code
    spec_eid = [e for e in events if e["tableName"] == "SpecLine"][0]["eventID"]
    code, out, _ = run(capsys, "--data", str(data), "undo", str(spec_eid))
    assert code == 0  # SpecLine has no dependents
    xc_eid = [e for e in events if e["tableName"] == "SpecObj"][0]["eventID"]
    code, out, err = run(capsys, "--data", str(data), "undo", str(xc_eid))
    assert code == 3  # SpecLineIndex/XCRedshift still reference SpecObj


def test_load_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("fieldID,run\n", encoding="utf-8")
    code, out, _ = run(capsys, "--data", str(tmp_path / "d"), "load", "Field", str(bad))
    assert code == 2
    code, _, err = run(
        capsys, "--data", str(tmp_path / "d"), "load", "Field",
        str(tmp_path / "missing.csv"),
    )
    assert code == 2


def test_audit_reports_violations(tmp_path, capsys):
    # hand-build a snapshot with an orphaned neighbor pair
    from skycat.store import CatalogStore
    import numpy as np

    store = CatalogStore()
    snap_path = tmp_path / "broken.snapshot"
    data = dict(store.snapshot())
    data["Neighbors"] = {
        "objID": np.array([1], dtype=np.int64),
        "neighborObjID": np.array([2], dtype=np.int64),
        "distance": np.array([0.1]),
        "loadTime": np.array([1], dtype=np.int64),
    }
    store._data = data
    store.persist(str(snap_path))
    code, out, _ = run(capsys, "store", "audit", str(snap_path))
    assert code == 2
    assert "Neighbors" in out


def test_cli_entry_point_subprocess(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "skycat.cli", "htm", "lookup", "10", "10", "5"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert int(proc.stdout.strip()) == htm.htm_lookup_radec(10, 10, 5)


def test_bench_smoke(capsys):
    code, out, _ = run(capsys, "bench", "scan", "--rows", "20000")
    assert code == 0
    stats = json.loads(out[out.index("{"):])
    assert stats["rows"] == 20000 and stats["rows_per_second"] > 0
