"""Command line drivers: report schema, determinism, exit codes."""

import json

import pytest

from elastoray import cli

SCHEMA_KEYS = {"command", "medium_digest", "params", "results", "failures"}


def run(media_dir, tmp_path, sub, *args, medium="constant.json", name="out.json"):
    out = tmp_path / name
    rc = cli.main(["--medium", str(media_dir / medium), "--out", str(out), sub,
                   *args])
    return rc, json.loads(out.read_text()) if out.exists() else None, out


def test_validate_known_good(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "validate")
    assert rc == 0
    assert set(doc) == SCHEMA_KEYS
    assert doc["command"] == "validate"
    assert doc["failures"] == []
    assert doc["results"]["class_report"]["admissible"] is True


def test_validate_inadmissible_medium(tmp_path):
    doc = {
        "domain": {"kind": "ball"},
        "rho": 1.0,
        "lambda": 1.0,
        "mu": 0.2,
        "class_params": {"L": 3.0, "eps": 0.2, "delta": 0.5},
    }
    path = tmp_path / "thin.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "report.json"
    rc = cli.main(["--medium", str(path), "--out", str(out), "validate"])
    assert rc == 1
    report = json.loads(out.read_text())
    assert report["failures"] != []


def test_missing_medium_is_config_error(tmp_path, capsys):
    rc = cli.main(["--medium", str(tmp_path / "nope.json"), "validate"])
    assert rc == 2
    assert "error" in capsys.readouterr().err.lower()


def test_corrupt_medium_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = cli.main(["--medium", str(bad), "validate"])
    assert rc == 2
    assert capsys.readouterr().err != ""


def test_classify_report_and_csv(media_dir, tmp_path):
    csv_path = tmp_path / "labels.csv"
    rc, doc, _ = run(media_dir, tmp_path, "classify", "--fan-n", "20",
                     "--csv", str(csv_path))
    assert rc == 0
    assert len(doc["results"]["rows"]) == 20
    counts = doc["results"]["region_counts"]
    assert sum(counts.values()) == 20
    header = csv_path.read_text().splitlines()[0].split(",")
    assert {"tau", "s_label", "p_label", "combined"} <= set(header)


def test_roots_flags_glancing_row(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "roots", "--fan-n", "10")
    assert rc == 0
    rows = doc["results"]["rows"]
    flagged = [r for r in rows if r.get("skipped")]
    populated = [r for r in rows if not r.get("skipped")]
    assert len(flagged) >= 1  # the fan includes an exact P-glancing member
    assert any("glancing" in r["skipped"].lower() for r in flagged)
    assert populated and all("z_s_forward" in r for r in populated)
    assert doc["results"]["lopatinski"]["min_normalized"] > 0.0


def test_dn_and_frame_clean(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "dn", "--fan-n", "25")
    assert rc == 0 and doc["failures"] == []
    rc, doc, _ = run(media_dir, tmp_path, "frame", "--fan-n", "25",
                     medium="constant_stress.json")
    assert rc == 0 and doc["failures"] == []


def test_dn_unattainable_tolerance_fails(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "dn", "--fan-n", "10",
                     "--tol", "1e-17")
    assert rc == 1
    assert doc["failures"] != []


def test_trace_csv_samples(media_dir, tmp_path):
    csv_path = tmp_path / "ray.csv"
    rc, doc, _ = run(media_dir, tmp_path, "trace", "--mode", "S",
                     "--csv", str(csv_path))
    assert rc == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "s,t,x1,x2,x3,xi1,xi2,xi3"
    assert len(lines) > 2


def test_trace_broken_transport(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "trace", "--depth", "1")
    assert rc == 0
    events = doc["results"]["events"]
    assert len(events) >= 2
    times = [e["gamma"]["t"] for e in events]
    assert times == sorted(times)


def test_lensmap_both_modes(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "lensmap", "--fan-n", "8")
    assert rc == 0
    rows = doc["results"]["rows"]
    assert len(rows) == 8
    assert all({"S", "P"} <= set(r) for r in rows)


def test_distance_matrix(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "distance", "--points", "3",
                     "--starts", "12")
    assert rc == 0
    rows = doc["results"]["rows"]
    assert len(rows) == 3  # unordered pairs of 3 boundary points
    for row in rows:
        for mode in ("S", "P"):
            assert row[mode]["connected"] is True
            assert row[mode]["miss"] <= 1e-9
        assert row["P"]["distance"] < row["S"]["distance"]


def test_recover_small(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "recover", "--probes", "4",
                     medium="constant_stress.json")
    assert rc == 0
    assert doc["results"]["report"]["max_dt"] <= 1e-6


def test_selftest_green(media_dir, tmp_path):
    rc, doc, _ = run(media_dir, tmp_path, "selftest", "--samples", "400")
    assert rc == 0
    assert doc["failures"] == []


def test_reports_are_byte_deterministic(media_dir, tmp_path):
    _, _, out1 = run(media_dir, tmp_path, "recover", "--probes", "3",
                     name="a.json")
    _, _, out2 = run(media_dir, tmp_path, "recover", "--probes", "3",
                     name="b.json")
    assert out1.read_bytes() == out2.read_bytes()


def test_thread_count_does_not_change_report(media_dir, tmp_path, monkeypatch):
    _, _, out1 = run(media_dir, tmp_path, "lensmap", "--fan-n", "6",
                     name="t1.json")
    monkeypatch.setenv("ELASTORAY_THREADS", "4")
    _, _, out2 = run(media_dir, tmp_path, "lensmap", "--fan-n", "6",
                     name="t4.json")
    assert out1.read_bytes() == out2.read_bytes()


def test_all_media_validate(media_dir, tmp_path):
    for name in ("constant.json", "constant_stress.json",
                 "potential_stress.json", "gaussian_bump.json"):
        rc, doc, _ = run(media_dir, tmp_path, "validate", medium=name,
                         name=f"v_{name}")
        assert rc == 0, name
        assert doc["results"]["class_report"]["admissible"] is True
