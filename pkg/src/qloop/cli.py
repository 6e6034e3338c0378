"""Command line front end: representation checks, operator export and relation verification."""
from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
import time
from typing import List, Optional

import numpy as np

from . import __version__
from .affine import GradationS, TwistPhi, affine_relation_residuals, barred_rep, eval_rep
from .chain import ChainSpec, ConvergenceError, build_Q, build_T, export_dict
from .core import QError, QParams
from .glmod import FINITE, VERMA, build_gl, gl_relation_residuals
from .osc import build_fock, build_osc_rep, fock_residuals
from .relations import RELATIONS, OperatorSet, RelationConstants, ResidualReport, verify

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2, 3

BASE_CONFIG = {
    "n": 2,
    "N": None,
    "hbar": "0.37j",
    "s": None,
    "phi": None,
    "inhom": None,
    "order": None,
    "K_verma": 32,
    "K_osc": 48,
    "bgg_K": [8, 16, 32],
    "q_limit": {"mus": [8, 16, 32], "K": 40},
    "tol": None,
    "relations": ["all"],
    "out": "qloop-out",
    "seed": 0,
}

RANK_DEFAULTS = {
    2: {"N": 2, "phi": ["1.6j", "-1.6j"], "order": 8},
    3: {"N": 1, "phi": ["8.5j", "-3j", "-5.5j"], "order": 6},
}


class ConfigError(ValueError):
    pass


def parse_complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ConfigError(f"complex number as a list needs [re, im], got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        try:
            return complex(x.replace(" ", ""))
        except ValueError as e:
            raise ConfigError(f"cannot parse complex number {x!r}") from e
    return complex(x)


def resolve(cfg: dict) -> dict:
    """Fill rank-dependent defaults."""
    out = copy.deepcopy(BASE_CONFIG)
    out.update(copy.deepcopy(cfg))
    n = out["n"]
    if n not in RANK_DEFAULTS:
        raise ConfigError(f"n must be 2 or 3, got {n!r}")
    for k, v in RANK_DEFAULTS[n].items():
        if out.get(k) is None:
            out[k] = copy.deepcopy(v)
    if out["s"] is None:
        out["s"] = [1] * n
    return out


def default_config(n: int = 2) -> dict:
    return resolve({"n": n})


def chain_from_config(cfg: dict) -> ChainSpec:
    n, N = cfg["n"], cfg["N"]
    if not isinstance(N, int) or N < 0:
        raise ConfigError(f"N must be a non-negative integer, got {N!r}")
    phi = [parse_complex(x) for x in cfg["phi"]]
    if len(phi) != n:
        raise ConfigError(f"phi needs {n} components, got {len(phi)}")
    if abs(sum(phi)) > 1e-12:
        raise ConfigError(f"twist parameters must satisfy the condition sum(phi_i) = 0; got sum = {sum(phi):.6g}")
    s = list(cfg["s"])
    if len(s) != n:
        raise ConfigError(f"gradation s needs {n} components")
    if sum(s) == 0:
        raise ConfigError("gradation total s = sum(s_i) must be nonzero")
    try:
        p = QParams(parse_complex(cfg["hbar"]))
    except QError as e:
        raise ConfigError(f"q is not allowed to be a root of unity: {e}") from e
    inhom = None if cfg["inhom"] is None else tuple(parse_complex(z) for z in cfg["inhom"])
    try:
        c = ChainSpec(n, N, p, TwistPhi(tuple(phi)), GradationS(tuple(s)), inhom, int(cfg["order"]))
        RelationConstants.build(c)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return c


def set_key(cfg: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = val


def load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
    for a in args.set or []:
        set_key(cfg, a)
    if args.out:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    return resolve(cfg)


# ---------------------------------------------------------------------------
# output

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(np.real(x)), float(np.imag(x))]
    if isinstance(x, np.generic):
        return x.item()
    return x


def write_reports(out_dir: str, rows: List[dict], cfg: dict, extra: Optional[dict] = None, timing=None):
    os.makedirs(out_dir, exist_ok=True)
    fields = list(rows[0].keys()) if rows else ["relation"]
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    doc = {"version": __version__, "config": _portable(cfg), "rows": rows}
    if extra:
        doc.update(extra)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_plain(doc), fh, indent=1, sort_keys=True)
        fh.write("\n")
    if timing is not None:
        with open(os.path.join(out_dir, "timing.json"), "w") as fh:
            json.dump(_plain(timing), fh, indent=1, sort_keys=True)


def _portable(cfg: dict) -> dict:
    """Config without the output location, so reports do not depend on where they are written."""
    return {k: v for k, v in cfg.items() if k != "out"}


def _print_rows(rows, key="relation"):
    for r in rows:
        print(f"{r['status']:6s} {r[key]:44s} residual={r['residual']:.2e} tol={r['tol']:.0e}")


# ---------------------------------------------------------------------------
# commands

def rep_checks(cfg: dict, tol: float = 1e-10) -> List[dict]:
    """Residual rows for the gl_n modules, their evaluation representations and the oscillator representations."""
    n = cfg["n"]
    p = QParams(parse_complex(cfg["hbar"]))
    grad = GradationS(tuple(cfg["s"]))
    mods = ([((1, 0), FINITE), ((2, 0), FINITE), ((0.3, -0.2), VERMA)] if n == 2 else
            [((1, 0, 0), FINITE), ((1, 1, 0), FINITE), ((0.3, -0.4, 0.1), VERMA)])
    rows = []

    def add(label, res: dict):
        worst = max(res.values()) if res else 0.0
        key = max(res, key=res.get) if res else ""
        rows.append({"representation": label, "residual": float(worst), "worst_check": key, "checks": len(res),
                     "tol": tol, "status": "pass" if worst < tol else "fail"})

    for lam, kind in mods:
        K = 8 if kind == VERMA else None
        m = build_gl(p, lam, kind, K)
        add(f"gl module {kind} {lam}", gl_relation_residuals(m))
        rep = eval_rep(p, lam, kind, K=K, grad=grad)
        add(f"evaluation {kind} {lam}", affine_relation_residuals(rep))
        if kind == FINITE:
            dual = tuple(-x for x in reversed(lam))
            add(f"barred evaluation {lam}", affine_relation_residuals(barred_rep(eval_rep(p, dual, FINITE, grad=grad))))
    add("fock K=8", fock_residuals(build_fock(p, 8)))
    for i in range(1, n + 1):
        for barred in (False, True):
            rep = build_osc_rep(p, n, i, barred, grad=grad, K=8)
            add(rep.label, affine_relation_residuals(rep))
    return rows


def cmd_check_reps(cfg: dict) -> int:
    chain_from_config(cfg)
    t0 = time.time()
    rows = rep_checks(cfg)
    _print_rows(rows, "representation")
    write_reports(cfg["out"], rows, cfg, timing={"total": time.time() - t0})
    return EXIT_OK if all(r["status"] == "pass" for r in rows) else EXIT_FAIL


BUILD_KINDS = ("T", "Tverma", "Tbar", "Q", "Qbar")


def cmd_build(cfg: dict, kind: str, lam=None, index: int = 1, K: Optional[int] = None) -> int:
    c = chain_from_config(cfg)
    if kind in ("T", "Tverma", "Tbar"):
        if lam is None:
            lam = (1,) + (0,) * (c.n - 1)
        if len(lam) != c.n:
            raise ConfigError(f"weight needs {c.n} components")
        bk = {"T": "finite", "Tverma": "verma", "Tbar": "barred"}[kind]
        op = build_T(bk, lam, c, K=K or (cfg["K_verma"] if kind == "Tverma" else None))
        label = ",".join(f"{x:g}" for x in lam)
    else:
        if not 1 <= index <= c.n:
            raise ConfigError(f"Q index must be in 1..{c.n}")
        op = build_Q(index, kind == "Qbar", c, K=K or cfg["K_osc"])
        label = str(index)
    doc = export_dict(op.payload, kind, label)
    doc["config"] = _portable(cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], f"{kind}_{label}.json")
    with open(path, "w") as fh:
        json.dump(_plain(doc), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(path)
    return EXIT_OK


def cmd_verify(cfg: dict, names: List[str]) -> int:
    c = chain_from_config(cfg)
    names = names or cfg["relations"]
    if names != ["all"]:
        bad = [x for x in names if x not in RELATIONS]
        if bad:
            raise ConfigError(f"unknown relation(s) {bad}; valid names: all, {', '.join(sorted(RELATIONS))}")
    ops = OperatorSet(c, K_verma=cfg["K_verma"], K_osc=cfg["K_osc"], tol=cfg["tol"], seed=cfg["seed"])
    options = {"bgg": {"Ks": tuple(cfg["bgg_K"])},
               "q_limit": {"mus": tuple(cfg["q_limit"]["mus"]), "K": cfg["q_limit"]["K"]}}
    t0 = time.time()
    reports: List[ResidualReport] = verify(ops, names, options)
    rows = []
    for r in reports:
        row = r.row()
        row.pop("runtime")
        rows.append(row)
    _print_rows(rows)
    timing = {"total": time.time() - t0, "relations": {r.name: r.runtime for r in reports}}
    diag = {r.name: r.diagnostics for r in reports}
    write_reports(cfg["out"], rows, cfg, {"diagnostics": diag}, timing)
    failed = [r for r in reports if r.status == "fail"]
    print(f"{len(reports) - len(failed)}/{len(reports)} passed or informational, {time.time() - t0:.1f}s")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _common() -> argparse.ArgumentParser:
    a = argparse.ArgumentParser(add_help=False)
    a.add_argument("--config", help="JSON configuration file")
    a.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (JSON value)")
    a.add_argument("--out", help="output directory")
    a.add_argument("--seed", type=int, help="random seed (u64)")
    return a


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="qloop", parents=[common],
                                 description="Transfer and Q-operators of quantum loop algebras on small chains")
    ap.add_argument("--print-default-config", action="store_true", help="print the full default configuration")
    sub = ap.add_subparsers(dest="command")
    sub.add_parser("check-reps", parents=[common], help="check representation relations")
    b = sub.add_parser("build", parents=[common], help="build and export one operator")
    b.add_argument("kind", choices=BUILD_KINDS)
    b.add_argument("--lam", help="comma separated weight, e.g. 1,0")
    b.add_argument("--index", type=int, default=1, help="Q-operator index")
    b.add_argument("--K", type=int, help="trace truncation")
    v = sub.add_parser("verify", parents=[common], help="verify functional relations")
    v.add_argument("names", nargs="*", help="relation names or 'all'")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.print_default_config:
            print(json.dumps(default_config(cfg["n"]), indent=1))
            return EXIT_OK
        if args.command is None:
            ap.print_usage()
            return EXIT_CONFIG
        if args.command == "check-reps":
            return cmd_check_reps(cfg)
        if args.command == "build":
            lam = None if args.lam is None else tuple(float(x) for x in args.lam.split(","))
            return cmd_build(cfg, args.kind, lam, args.index, args.K)
        return cmd_verify(cfg, args.names)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
