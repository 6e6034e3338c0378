import json
import subprocess
import sys

import pytest

from qloop.chain import import_dict
from qloop.cli import main


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_check_reps(tmp_path):
    assert run(tmp_path, "check-reps", "--set", "n=2") == 0


def test_verify_pass_and_fail(tmp_path):
    assert run(tmp_path / "a", "verify", "TQ", "--set", "N=1") == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    rows = rep["rows"]
    assert rows and all(r["status"] in ("pass", "absent") for r in rows)
    assert run(tmp_path / "b", "verify", "TQ", "--set", "N=1", "--set", "tol=1e-30") == 1


def test_reports_are_deterministic(tmp_path):
    for d in ("x", "y"):
        assert run(tmp_path / d, "verify", "TT", "det_T", "--set", "N=1") == 0
    for f in ("report.json", "report.csv"):
        assert (tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes()


@pytest.mark.parametrize("sets", [["phi=[\"1j\", \"1j\"]"], ["s=[0,0]"], ["N=-1"], ["hbar=0"]])
def test_bad_config_exits_2(tmp_path, sets, capsys):
    args = ["verify", "TQ"]
    for x in sets:
        args += ["--set", x]
    assert run(tmp_path, *args) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_relation_exits_2(tmp_path):
    assert run(tmp_path, "verify", "bogus") == 2


def test_convergence_failure_exits_3(tmp_path):
    assert run(tmp_path, "build", "Tverma", "--lam", "0.3,-0.2", "--K", "2", "--set", "N=1") == 3


def test_build_exports_operator(tmp_path):
    assert run(tmp_path, "build", "T", "--lam", "1,0", "--set", "N=0") == 0
    (f,) = tmp_path.glob("T_*.json")
    op = import_dict(json.loads(f.read_text()))
    assert op.dim == 1


def test_console_script_prints_default_config():
    out = subprocess.run([sys.executable, "-m", "qloop.cli", "--print-default-config", "--set", "n=3"],
                         capture_output=True, text=True, check=True).stdout
    cfg = json.loads(out)
    assert cfg["n"] == 3 and len(cfg["phi"]) == 3
