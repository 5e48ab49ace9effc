import csv
import json
import shutil
import subprocess

import pytest

from alrbem.cli import DEFAULTS, load_config, main


def write_config(tmp_path, **sections):
    cfg = {"output": {"dir": str(tmp_path), "prefix": "run", "grid": {"n": 11}}}
    cfg.update(sections)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


ANNULUS = dict(geometry={"engine": "annulus-series", "r_c": 2, "r_s": 4, "modes": 200},
               medium={"omega": 0, "b": 1},
               source=[{"kind": "dipole", "location": [5, 0], "moment": [1, 0]}],
               sweep={"start": 1e-3, "stop": 1e-6, "count": 4})


def test_radii(capsys):
    assert main(["radii", "2", "4", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["r_star"] == 8 and out["resonant_annuli"] == [[1.25, 6.4]]


def test_sweep_writes_csv_and_summary(tmp_path):
    assert main(["sweep", str(write_config(tmp_path, **ANNULUS))]) == 0
    rows = (tmp_path / "run_sweep.csv").read_text().splitlines()
    assert rows[0] == "# alrbem sweep v1" and len(rows) == 6
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["classification"]["label"] == "ALR"
    assert summary["classification"]["thresholds"]["alr_slope"] == -0.45


def test_inconclusive_sweep_exit_code(tmp_path):
    sections = dict(ANNULUS, sweep=dict(ANNULUS["sweep"], thresholds={"max_stderr": 1e-9}))
    assert main(["sweep", str(write_config(tmp_path, **sections))]) == 2


def test_solve_writes_field_grid(tmp_path):
    assert main(["solve", str(write_config(tmp_path, **ANNULUS))]) == 0
    lines = (tmp_path / "run_field.csv").read_text().splitlines()
    assert lines[0] == "# alrbem field v1"
    rows = list(csv.DictReader(lines[1:]))
    assert list(rows[0]) == ["x", "y", "re_u", "im_u", "abs_u", "region"]
    assert len(rows) == 121 and {r["region"] for r in rows} == {"core", "shell", "exterior"}


def test_bem_solve(tmp_path):
    cfg = write_config(tmp_path, geometry={"n_nodes": 64},
                       medium={"omega": 1, "eta": [0.5, 0], "b": 1},
                       source=[{"kind": "point", "location": [6, 0]}])
    assert main(["solve", str(cfg)]) == 0
    summary = json.loads((tmp_path / "run_solve.json").read_text())
    assert summary["residual"] < 1e-10


def test_errors_exit_with_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"geometry": {}, "colour": {}}))
    assert main(["sweep", str(bad)]) == 1
    assert main(["solve", str(tmp_path / "missing.json")]) == 1


def test_defaults_are_complete(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    assert load_config(path) == DEFAULTS


def test_validate_suite(capsys):
    assert main(["validate"]) == 0
    assert capsys.readouterr().out.count("PASS") == 4


@pytest.mark.skipif(shutil.which("alrbem") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["alrbem", "radii", "1", "2"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["r_crit"] == 8
