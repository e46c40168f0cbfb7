import csv
import subprocess
import sys
from pathlib import Path

import pytest

from hybridcov.cli import main

ROOT = Path(__file__).resolve().parents[1]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_validate_default(capsys):
    assert main(["validate"]) == 0
    assert "ok: 3 tiers" in capsys.readouterr().out


def test_validate_reports_errors(tmp_path, capsys):
    text = (ROOT / "src/hybridcov/data/table2.toml").read_text()
    bad = write(tmp_path / "bad.toml", text.replace("density = 2e-6", "density = 0.0"))
    assert main(["validate", "--scenario", bad]) == 1
    assert "DensityNonPositive(tier=1)" in capsys.readouterr().out
    broken = write(tmp_path / "broken.toml", "[global\n")
    assert main(["validate", "--scenario", broken]) == 2


def test_empty_grid_fails(tmp_path):
    sweep = write(tmp_path / "s.toml", '[sweep]\nid = "cov-vs-ka"\ngrid = []\n')
    assert main(["run", "--sweep", sweep, "--out", str(tmp_path / "o"), "--quiet"]) != 0


def test_run_threshold_sweep(tmp_path):
    sweep = write(tmp_path / "s.toml", '[sweep]\nid = "cov-vs-threshold"\n'
                  'grid = [-5.0, 5.0]\nengines = "both"\ntrials = 300\nseed = 1\n')
    out = tmp_path / "o"
    assert main(["run", "--sweep", sweep, "--out", str(out), "--quiet"]) == 0
    rows = read_rows(out / "cov-vs-threshold.csv")
    assert {r["engine"] for r in rows} == {"analytical", "mc"}
    assert {r["threshold"] for r in rows} == {"-5.0", "5.0"}
    summary = read_rows(out / "cov-vs-threshold-summary.csv")
    assert any(r["tier"] == "total" for r in summary)


def test_association_sweep_is_monotone(tmp_path):
    sweep = write(tmp_path / "s.toml", '[sweep]\nid = "assoc-vs-bias"\n'
                  'grid = [-10.0, 0.0, 10.0, 20.0, 30.0]\nengines = "analytical"\n')
    out = tmp_path / "o"
    assert main(["run", "--sweep", sweep, "--out", str(out), "--quiet"]) == 0
    rows = read_rows(out / "assoc-vs-bias.csv")
    for d in ("dl", "ul"):
        a3 = [float(r["estimate"]) for r in rows if r["tier"] == "3" and r["direction"] == d]
        assert len(a3) == 5 and all(b > a for a, b in zip(a3, a3[1:]))


def test_rerun_is_byte_identical_across_workers(tmp_path):
    sweep = write(tmp_path / "s.toml", '[sweep]\nid = "cov-vs-density"\n'
                  'grid = [1.0, 10.0]\nengines = "both"\ntrials = 1200\nseed = 4\n')
    outs = []
    for i, workers in enumerate((1, 2, 1)):
        out = tmp_path / f"o{i}"
        assert main(["run", "--sweep", sweep, "--out", str(out), "--workers", str(workers),
                     "--quiet"]) == 0
        outs.append((out / "cov-vs-density.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_compare(tmp_path):
    out = tmp_path / "o"
    assert main(["compare", "--bias-grid", "0,10", "--trials", "400", "--out", str(out),
                 "--quiet"]) == 0
    rows = read_rows(out / "compare-coupled.csv")
    assert {r["direction"] for r in rows} == {"dl", "ul", "ul-coupled"}
    assert {r["metric"] for r in rows} >= {"p5_rate", "p5_sinr"}


def test_compare_rejects_bad_grid(tmp_path):
    assert main(["compare", "--bias-grid", "10:0:1", "--out", str(tmp_path)]) != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hybridcov", "validate"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0 and "ok" in res.stdout


def test_shipped_sweeps_parse():
    from hybridcov.scenario import load_document
    from hybridcov.sweeps import sweep_from_document
    files = sorted((ROOT / "sweeps").glob("*.toml"))
    assert len(files) == 9
    for f in files:
        assert sweep_from_document(load_document(f)).problems() == []
