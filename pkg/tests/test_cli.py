import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from torus_ma.cli import main
from torus_ma.estimates import CSV_COLUMNS
from torus_ma.path import PATH_COLUMNS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def run(command, config, out, *extra):
    return main([command, "--config", str(CONFIGS / config), "--out", str(out), *extra])


@pytest.mark.parametrize("config,n", [("flat_n1.ini", 1), ("flat_n2.ini", 2)])
def test_flat_path_run(tmp_path, config, n):
    assert run("path", config, tmp_path) == 0
    rows = [r for r in read_csv(tmp_path / "path.csv") if r["status"] == "ok"]
    t = np.array([float(r["t"]) for r in rows])
    vol = np.array([float(r["volume"]) for r in rows])
    assert t.min() == pytest.approx(0.1)
    assert np.max(np.abs(vol - t ** n)) <= 1e-8
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["exit_code"] == 0 and rep["failures"] == []
    assert rep["path"]["t_min_reached"]
    assert set(rep["versions"]) >= {"torus_ma", "numpy", "scipy", "python"}
    assert rep["config"]["problem"]["n"] == n
    assert list(read_csv(tmp_path / "estimates.csv")[0]) == list(CSV_COLUMNS)


def test_perturbed_run_writes_fields(tmp_path):
    assert run("path", "perturbed_n1.ini", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["fit"]["intercept"] == pytest.approx(0, abs=1e-6)
    assert all(q["C_q"] is None or q["C_q"] < 1e3 for q in rep["quadratic_constants"])
    assert {p.name for p in (tmp_path / "fields").iterdir()} == {"u.bin", "omega_t.bin"}


def test_zero_tolerance_run_fails(tmp_path):
    assert run("path", "perturbed_n1_zero_tol.ini", tmp_path) != 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["failures"] and all(f["kind"] == "check" for f in rep["failures"])


def test_estimates_run(tmp_path):
    assert run("estimates", "synthetic_n1.ini", tmp_path) == 0
    rows = read_csv(tmp_path / "estimates.csv")
    cy = [r for r in rows if r["check"] == "cheng_yau"]
    assert len(cy) == 20 and all(r["status"] == "pass" for r in cy)
    assert (tmp_path / "path.csv").read_text().strip() == ",".join(PATH_COLUMNS)


def test_solve_and_curvature(tmp_path):
    assert run("solve", "perturbed_n1.ini", tmp_path / "s") == 0
    rep = json.loads((tmp_path / "s" / "report.json").read_text())
    t1 = rep["config"]["run"]["t"]
    assert rep["state"]["t"] == t1 and rep["state"]["residual_sup"] <= 1e-10
    assert run("curvature", "perturbed_n1.ini", tmp_path / "c") == 0
    k = json.loads((tmp_path / "c" / "curvature.json").read_text())
    assert k["classification"] == "mixed"


def test_config_error_still_reports(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nn = 1\nN = 8\n[schedule]\n")
    assert main(["path", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["failures"][0]["kind"] == "config"
    assert rep["failures"][0]["field"] == "t_min"


def test_missing_config_file(tmp_path):
    assert main(["path", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == 2
    assert json.loads((tmp_path / "report.json").read_text())["exit_code"] == 2


def test_module_entry_point_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        cmd = [sys.executable, "-m", "torus_ma", "path", "--config", str(CONFIGS / "flat_n1.ini"),
               "--out", str(out), "--threads", "1"]
        assert subprocess.run(cmd, capture_output=True).returncode == 0
        outs.append(((out / "path.csv").read_bytes(), (out / "estimates.csv").read_bytes()))
    assert outs[0] == outs[1]
