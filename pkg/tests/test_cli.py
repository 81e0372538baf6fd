import json
import re
import shutil
import subprocess
import sys

import numpy as np
import pytest

from sdr.cli import main
from sdr.generalization import DotCloud
from sdr.rydberg import WaveformSet


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def dots_file(path, pts, source="q"):
    path.write_text(DotCloud(np.asarray(pts, float), [], 1.0, source, 100, 100).to_json())
    return path


def grid_cloud(k):
    g = (np.arange(k) + 0.5) / k
    return np.array([(x, y) for y in g for x in g])


@pytest.fixture
def five_images(tmp_path, fixture_dir):
    d = tmp_path / "img"
    d.mkdir()
    for name in ("bolt", "cup", "key", "nut", "wrench"):
        shutil.copy(fixture_dir / f"{name}.pgm", d)
    return d


# -- encode ------------------------------------------------------------------

def test_encode(capsys, tmp_path, fixture_dir):
    code, out, err = run(capsys, "encode", "--input", fixture_dir / "wrench.pgm",
                         "--out", tmp_path / "w.json", "--budget", 21, "--plot", tmp_path / "w.svg")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 1
    doc = json.loads(lines[0])
    assert 1 <= doc["atoms"] <= 21 and doc["epsilon"] > 0
    cloud = DotCloud.from_json((tmp_path / "w.json").read_text())
    assert len(cloud) == doc["atoms"]
    svg = (tmp_path / "w.svg").read_text()
    assert svg.count("<circle") == doc["atoms"]
    assert "wrench.pgm" in err


def test_encode_missing(capsys, tmp_path):
    code, out, err = run(capsys, "encode", "--input", tmp_path / "nope.pgm", "--out", tmp_path / "o.json")
    assert code == 2 and out == "" and "nope.pgm" in err


def test_encode_budget_unreachable(capsys, tmp_path, fixture_dir):
    code, out, err = run(capsys, "encode", "--input", fixture_dir / "bracket.pgm", "--out",
                         tmp_path / "o.json", "--budget", 2, "--json")
    assert code == 3
    doc = json.loads(out)
    assert doc["exit_code"] == 3 and "unreachable" in doc["error"] and err == ""


def test_config_precedence(capsys, tmp_path, fixture_dir, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budget": 9}))
    args = ["encode", "--input", fixture_dir / "saw.pgm", "--out", tmp_path / "o.json", "--json"]
    _, out, _ = run(capsys, *args, "--config", cfg)
    assert json.loads(out)["atoms"] <= 9
    _, out, _ = run(capsys, *args, "--config", cfg, "--budget", 14)
    assert 9 < json.loads(out)["atoms"] <= 14
    monkeypatch.setenv("SDR_CONFIG", str(cfg))
    _, out, _ = run(capsys, *args)
    assert json.loads(out)["atoms"] <= 9


def test_bad_config(capsys, tmp_path, fixture_dir):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budgte": 9}))
    code, out, _ = run(capsys, "encode", "--input", fixture_dir / "saw.pgm", "--out",
                       tmp_path / "o.json", "--config", cfg, "--json")
    assert code == 2 and "budgte" in json.loads(out)["error"]


# -- simulate ----------------------------------------------------------------

def test_simulate_nine(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", grid_cloud(3))
    code, out, _ = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json",
                       "--plot", tmp_path / "e.svg", "--shots", 200, "--seed", 3,
                       "--state-out", tmp_path / "s.bin")
    assert code == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    assert len(doc["densities"]) == 9 and doc["kind"] == "evolved"
    assert all(0 <= d <= 1 + 1e-9 for d in doc["densities"])
    assert doc["norm_drift"] <= 1e-6 and doc["steps"] == 4000
    assert sum(doc["counts"].values()) == 200
    assert (tmp_path / "s.bin").stat().st_size == 16 + 16 * 2**9
    fills = re.findall(r'fill="(#[0-9a-f]{6})" stroke', (tmp_path / "e.svg").read_text())
    assert len(fills) == 9
    assert json.loads(out)["densities"] == doc["densities"]


def test_simulate_strict_spacing(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", [[0.1, 0.1], [0.102, 0.1], [0.9, 0.9]])
    code, _, err = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json", "--strict")
    assert code == 4 and "atoms 0 and 1" in err


def test_simulate_too_many_for_full(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", grid_cloud(5))
    code, _, err = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json")
    assert code == 4 and "--basis blockade" in err


def test_simulate_drift_abort(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", [[0.45, 0.5], [0.5, 0.5]])
    code, _, err = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json",
                       "--method", "rk4", "--dt", 0.01, "--duration", 0.5)
    assert code == 5 and "drift" in err


def test_simulate_waveform_file(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", [[0.1, 0.5], [0.9, 0.5]])
    w = tmp_path / "w.json"
    w.write_text(WaveformSet.constant(omega=2 * np.pi, duration=0.5).to_json())
    code, _, _ = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json", "--waveforms", w)
    assert code == 0
    dens = json.loads((tmp_path / "e.json").read_text())["densities"]
    assert np.allclose(dens, [1.0, 1.0], atol=1e-4)  # 60 um apart: independent pi pulses
    code, _, err = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json",
                       "--waveforms", w, "--strict")
    assert code == 4 and "start and end at zero" in err


def test_simulate_blockade_basis(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", grid_cloud(5))
    code, out, _ = run(capsys, "simulate", "--dots", q, "--out", tmp_path / "e.json",
                       "--basis", "blockade", "--blockade-radius", 16, "--duration", 0.05, "--json")
    assert code == 0 and len(json.loads(out)["densities"]) == 25


def test_simulate_not_a_cloud(capsys, tmp_path):
    (tmp_path / "x.json").write_text("{]")
    code, _, _ = run(capsys, "simulate", "--dots", tmp_path / "x.json", "--out", tmp_path / "e.json")
    assert code == 2


# -- database and match --------------------------------------------------------

def test_db_build_and_match(capsys, tmp_path, five_images):
    code, out, err = run(capsys, "db-build", "--images", five_images, "--out", tmp_path / "db",
                         "--budget", 21)
    assert code == 0 and "cup.pgm" in err
    summary = json.loads(out)
    assert summary["entries"] == 5 and summary["skipped"] == []

    code, out, _ = run(capsys, "match", "--query", tmp_path / "db" / "entries" / "key.dots.json",
                       "--db", tmp_path / "db")
    ranking = json.loads(out)["ranking"]
    assert code == 0 and ranking[0]["id"] == "key" and ranking[0]["distance"] < 1e-12

    code, out, _ = run(capsys, "match", "--query", tmp_path / "db" / "entries" / "key.dots.json",
                       "--db", tmp_path / "db", "--top", 3, "--json")
    ranking = json.loads(out)["ranking"]
    assert len(ranking) == 3
    assert [r["distance"] for r in ranking] == sorted(r["distance"] for r in ranking)

    code, out, _ = run(capsys, "match", "--query", tmp_path / "db" / "entries" / "key.dots.json",
                       "--db", tmp_path / "db", "--mode", "density_weighted", "--json")
    assert code == 2 and "simulate" in json.loads(out)["error"]

    code, out, _ = run(capsys, "db-verify", "--db", tmp_path / "db", "--json")
    assert code == 0 and json.loads(out)["ok"]
    f = tmp_path / "db" / "entries" / "nut.dots.json"
    f.write_text(f.read_text() + " ")
    code, out, _ = run(capsys, "db-verify", "--db", tmp_path / "db", "--json")
    assert code == 2 and "nut" in json.loads(out)["error"]


def test_match_density_query(capsys, tmp_path, five_images):
    run(capsys, "db-build", "--images", five_images, "--out", tmp_path / "db", "--budget", 8,
        "--evolve", "--duration", 0.05)
    q = tmp_path / "db" / "entries" / "cup.evolved.json"
    code, out, _ = run(capsys, "match", "--query", q, "--db", tmp_path / "db", "--mode",
                       "density_weighted")
    res = json.loads(out)
    assert code == 0 and res["mode"] == "density_weighted" and res["ranking"][0]["id"] == "cup"


def test_match_missing_db(capsys, tmp_path):
    q = dots_file(tmp_path / "d.json", [[0.1, 0.5]])
    code, _, err = run(capsys, "match", "--query", q, "--db", tmp_path / "nodb")
    assert code == 2 and "manifest" in err


def test_match_empty_db(capsys, tmp_path):
    (tmp_path / "db").mkdir()
    (tmp_path / "db" / "manifest.json").write_text(json.dumps(
        {"schema_version": 1, "max_atoms": 256, "entries": [], "skipped": []}))
    q = dots_file(tmp_path / "d.json", [[0.1, 0.5]])
    code, out, _ = run(capsys, "match", "--query", q, "--db", tmp_path / "db", "--json")
    assert code == 6 and json.loads(out)["exit_code"] == 6


def test_db_build_zero_entries(capsys, tmp_path):
    d = tmp_path / "img"
    d.mkdir()
    (d / "a.pgm").write_bytes(b"P5\n1 1\n255\n\x00")
    code, out, _ = run(capsys, "db-build", "--images", d, "--out", tmp_path / "db", "--json")
    assert code == 7 and json.loads(out)["exit_code"] == 7


def test_usage_error_json(capsys):
    code, out, _ = run(capsys, "encode", "--input", "x.pgm", "--out", "y.json", "--bogus", "--json")
    assert code == 2 and "--bogus" in json.loads(out)["error"]
    code, out, err = run(capsys, "encode")
    assert code == 2 and out == "" and "--input" in err


def test_pipeline_deterministic(capsys, tmp_path, fixture_dir):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        run(capsys, "encode", "--input", fixture_dir / "key.pgm", "--out", d / "k.json", "--budget", 7)
        run(capsys, "simulate", "--dots", d / "k.json", "--out", d / "e.json", "--duration", 0.3,
            "--shots", 100, "--seed", 5, "--plot", d / "e.svg")
        outs.append([(d / n).read_bytes() for n in ("k.json", "e.json", "e.svg")])
    assert outs[0] == outs[1]


def test_entry_point_subprocess(tmp_path, fixture_dir):
    r = subprocess.run([sys.executable, "-m", "sdr.cli", "encode", "--input",
                        str(fixture_dir / "nut.pgm"), "--out", str(tmp_path / "n.json"), "--json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stderr == ""
    assert json.loads(r.stdout)["atoms"] <= 21
