"""Acceptance criteria 1-11.  Each test records one pass/fail line, printed in the terminal summary.

Run alone with `pytest tests/test_acceptance.py -v` or `python3 tests/test_acceptance.py`.
"""
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import P, chain
from qloop.affine import fundamental_rep
from qloop.cli import default_config, rep_checks
from qloop.core import op_eval
from qloop.intertwine import solve_R
from qloop.relations import RELATIONS, OperatorSet, verify
from test_intertwine import embed

RESULTS = {}


def record(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def worst(reports):
    live = [r for r in reports if r.status != "absent"]
    bad = [r.name for r in live if not r.passed]
    return max(r.residual for r in live), bad, len(live)


def test_01_representations():
    t0 = time.time()
    rows = [r for n in (2, 3) for r in rep_checks({**default_config(n), "n": n})]
    dt = time.time() - t0
    res = max(r["residual"] for r in rows)
    ok = all(r["status"] == "pass" for r in rows) and res < 1e-10 and dt < 30
    record(1, ok, f"{len(rows)} representations, max residual {res:.1e} (< 1e-10), {dt:.1f}s (< 30s)")


def test_02_yang_baxter():
    rng = np.random.default_rng(2)
    res = 0.0
    for n in (2, 3):
        R = solve_R(fundamental_rep(P, n), fundamental_rep(P, n))
        for _ in range(5):
            z = rng.uniform(0.5, 1.5, 3) * np.exp(2j * np.pi * rng.uniform(size=3))
            R12 = embed(op_eval(R, z[0] / z[1]), 0, 1, n)
            R13 = embed(op_eval(R, z[0] / z[2]), 0, 2, n)
            R23 = embed(op_eval(R, z[1] / z[2]), 1, 2, n)
            lhs, rhs = R12 @ R13 @ R23, R23 @ R13 @ R12
            res = max(res, np.abs(lhs - rhs).max() / np.abs(lhs).max())
    record(2, res < 1e-9, f"n=2,3 at 5 random ratios, max residual {res:.1e} (< 1e-9)")


def test_03_commutativity():
    res, bad = 0.0, []
    for n, N in ((2, 1), (2, 2), (2, 3), (3, 1), (3, 2)):
        r, b, _ = worst(RELATIONS["commutativity"](OperatorSet(chain(n, N))))
        res, bad = max(res, r), bad + [f"n={n} N={N}" for _ in b]
    record(3, not bad and res < 1e-9, f"n=2 N<=3, n=3 N<=2, max commutator {res:.1e} (< 1e-9) {bad or ''}")


def test_04_baxter(ops2):
    reps = [r for r in RELATIONS["TQ"](ops2) if r.name.startswith("TQ/baxter")]
    res, bad, m = worst(reps)
    deltas = [ops2.Q_op(i, b).meta["cauchy_deltas"] for i in (1, 2) for b in (False, True)]
    ratio = min(d[0] / d[1] if d[1] else np.inf for d in deltas)
    ok = not bad and m == 2 and res < 1e-8 and ratio >= 10
    record(4, ok, f"n=2 N=2 Baxter max residual {res:.1e} (< 1e-8), min Cauchy ratio per doubling {ratio:.1e} (>= 10)")


def test_05_rank3_TQ(ops3):
    reps = [r for r in RELATIONS["TQ"](ops3) if r.name.split("/")[1].split(" ")[0] in
            ("unbarred", "barred", "first", "second")]
    res, bad, m = worst(reps)
    record(5, not bad and m >= 18 and res < 1e-7, f"n=3 N=1 {m} TQ/TQQbar rows, max residual {res:.1e} (< 1e-7)")


def test_06_fusion(ops2, ops3):
    r2, b2, _ = worst(RELATIONS["TT"](ops2, lmax=3))
    r3, b3, _ = worst(RELATIONS["TT"](ops3, lmax=2))
    ok = not (b2 or b3) and r2 < 1e-8 and r3 < 1e-7
    record(6, ok, f"n=2 l<=3 {r2:.1e} (< 1e-8), n=3 l<=2 {r3:.1e} (< 1e-7)")


def test_07_bgg(ops2_1, ops3):
    lines, ok = [], True
    for ops in (ops2_1, ops3):
        (r,) = RELATIONS["bgg"](ops, Ks=(8, 16, 32))
        d = r.diagnostics["residuals"]
        ok &= r.diagnostics["monotone"] and d[-1] < 1e-7
        lines.append(f"n={ops.n}: " + " > ".join(f"{x:.1e}" for x in d))
    record(7, ok, "K=8,16,32 N=1 " + "; ".join(lines) + " (monotone, last < 1e-7)")


def test_08_determinants(ops3):
    reps = verify(ops3, ["det_T", "double_Q"])
    cons = [r for r in reps if r.name == "calibration_consistency"]
    main = [r for r in reps if r.name != "calibration_consistency"]
    res, bad, _ = worst(main)
    ok = not bad and res < 1e-7 and len(cons) == 1 and cons[0].residual < 1e-6
    record(8, ok, f"n=3 det/double-Q max residual {res:.1e} (< 1e-7), "
                  f"calibration spread {cons[0].residual if cons else float('nan'):.1e} (< 1e-6)")


def test_09_jacobi_trudi(ops3):
    res, bad, m = worst(RELATIONS["jacobi_trudi"](ops3, shapes=((1, 1), (2, 1), (2, 2), (3, 2))))
    record(9, not bad and m == 4 and res < 1e-7, f"shapes (1,1),(2,1),(2,2),(3,2) max residual {res:.1e} (< 1e-7)")


def test_10_q_limit(ops_limit):
    (r,) = RELATIONS["q_limit"](ops_limit, mus=(8, 16, 32))
    d = r.diagnostics.get("distances", [])
    ok = r.status == "pass" and len(d) == 3 and d[0] > d[1] > d[2] and d[2] < 1e-5
    record(10, ok, "mu=8,16,32 distances " + " > ".join(f"{x:.1e}" for x in d) + " (strict, last < 1e-5)")


def _verify_all(n, out):
    t0 = time.time()
    cmd = [sys.executable, "-m", "qloop.cli", "verify", "all", "--set", f"n={n}", "--out", str(out)]
    code = subprocess.run(cmd, capture_output=True, text=True).returncode
    return code, time.time() - t0


@pytest.mark.slow
def test_11_full_run(tmp_path):
    lines, ok = [], True
    for n in (2, 3):
        a, b = tmp_path / f"n{n}a", tmp_path / f"n{n}b"
        ca, ta = _verify_all(n, a)
        cb, tb = _verify_all(n, b)
        same = all((a / f).read_bytes() == (b / f).read_bytes() for f in ("report.json", "report.csv"))
        rows = json.loads((a / "report.json").read_text())["rows"]
        fails = [r["relation"] for r in rows if r["status"] == "fail"]
        ok &= ca == cb == 0 and same and max(ta, tb) < 900 and not fails
        lines.append(f"n={n}: {len(rows)} rows, exit {ca}/{cb}, {max(ta, tb):.0f}s, identical={same}")
    record(11, ok, "; ".join(lines) + " (< 900s each, deterministic)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
