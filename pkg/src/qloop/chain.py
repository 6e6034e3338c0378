"""Transfer and Q-operators on a finite chain of fundamental sites.

Every object is a truncated power series in zeta with matrix coefficients on the
quantum space (site 1 is the slowest tensor index).  Intertwiners are normalised
universally: X(z) = F(z) * R(z) with R(0) = q^K and the scalar F fixed by requiring
the product over n sites of the intertwiners to act trivially on the B_- singlet
of the fundamental representation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .affine import (AffineRep, GradationS, TwistPhi, balancing_factors, barred_rep, eval_rep, rescale_e,
                     fundamental_rep)
from .core import LaurentOp, LaurentPoly, QParams, op_shift
from .glmod import FINITE, VERMA
from .intertwine import (BlockOp, IntertwinerError, WordExpansion, fit_family,
                         normalisation_series, singlet_ratios, singlet_vector,
                         solve_intertwiner)
from .osc import build_osc_rep


class ConvergenceError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# descriptors

@dataclass(frozen=True)
class ChainSpec:
    n: int
    N: int
    p: QParams
    phi: TwistPhi
    grad: Optional[GradationS] = None
    inhom: Optional[tuple] = None
    order: int = 10

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        if self.N < 0:
            raise ValueError("number of sites must be non-negative")
        if self.phi.n != self.n:
            raise ValueError("twist needs n components")
        g = self.grad or GradationS.default(self.n)
        if len(g.s) != self.n:
            raise ValueError("gradation needs n components")
        object.__setattr__(self, "grad", g)
        inh = tuple(complex(z) for z in (self.inhom or (1.0,) * self.N))
        if len(inh) != self.N or any(z == 0 for z in inh):
            raise ValueError("one nonzero inhomogeneity per site required")
        object.__setattr__(self, "inhom", inh)

    @property
    def s(self) -> int:
        return self.grad.total

    def site(self) -> AffineRep:
        return fundamental_rep(self.p, self.n, self.grad)

    @property
    def dim(self) -> int:
        return self.n ** self.N

    def cartan(self, i: int) -> np.ndarray:
        """Diagonal of the iterated coproduct image of h_i on the quantum space."""
        hs = self.site().h[i].real
        out = np.zeros(self.dim)
        for idx, multi in enumerate(itertools.product(range(self.n), repeat=self.N)):
            out[idx] = sum(hs[a] for a in multi)
        return out

    def hprime(self, i: int) -> np.ndarray:
        return self.cartan(i) + self.phi.phi[i]

    def with_order(self, order: int) -> "ChainSpec":
        return replace(self, order=order)


@dataclass(frozen=True)
class AuxSpec:
    """Auxiliary representation: finite pi^lambda, truncated Verma, or oscillator rho_i / rho-bar_i."""

    kind: str  # "finite" | "verma" | "osc"
    lam: tuple = ()
    i: int = 0
    barred: bool = False
    xi: Optional[tuple] = None

    def key(self, c: ChainSpec):
        return (self.kind, tuple(complex(x) for x in self.lam), self.i, self.barred, c.n, c.grad.s, c.p.hbar)

    def describe(self) -> str:
        if self.kind == "osc":
            return ("Qbar" if self.barred else "Q") + f"_{self.i}"
        tag = "T" if self.kind == "finite" else "Tverma"
        return tag + "(" + ",".join(f"{complex(x).real:g}" for x in self.lam) + ")" + ("bar" if self.barred else "")

    def make(self, c: ChainSpec, K: Optional[int] = None, windows=None) -> AffineRep:
        if self.kind == "osc":
            rep = build_osc_rep(c.p, c.n, self.i, self.barred, c.grad, K=K or 8, windows=windows)
        elif self.barred:
            if self.kind != "finite":
                raise ValueError("barred transfer operators are built on finite-dimensional modules only")
            # pi^{lambda*} o tau with lambda* = -w0 lambda carries the weights of pi^lambda
            dual = tuple(-x for x in reversed(self.lam))
            rep = barred_rep(eval_rep(c.p, dual, FINITE, grad=c.grad))
        elif self.kind == "finite":
            rep = eval_rep(c.p, self.lam, FINITE, grad=c.grad)
        else:
            rep = eval_rep(c.p, self.lam, VERMA, K=K, grad=c.grad)
            # factors fixed on a small truncation so that the whole family shares them
            small = eval_rep(c.p, self.lam, VERMA, K=2, grad=c.grad)
            rep = rescale_e(rep, balancing_factors(small))
        if self.xi is not None:
            rep = rep.with_shift(self.xi)
        return rep


def finite_T(lam) -> AuxSpec:
    return AuxSpec("finite", tuple(lam))


def verma_T(lam, xi=None) -> AuxSpec:
    return AuxSpec("verma", tuple(lam), xi=None if xi is None else tuple(xi))


def osc_Q(i: int, barred: bool = False) -> AuxSpec:
    return AuxSpec("osc", (), i, barred)


# ---------------------------------------------------------------------------
# intertwiner cache

_CACHE: Dict[tuple, dict] = {}


def clear_cache():
    _CACHE.clear()


def _entry(aux: AuxSpec, c: ChainSpec) -> dict:
    key = aux.key(c)
    if key in _CACHE:
        return _CACHE[key]
    site = c.site()
    base = replace(aux, xi=None)
    ent: dict = {"site": site}
    if aux.kind == "finite":
        rep = base.make(c)
        X, info = solve_intertwiner(rep, site, full=rep.f is not None)
        ent["finite_op"] = BlockOp.from_laurent(X, rep.dim, site.dim)
        ent["solve_info"] = info
        probe_rep = rep
        probe_ops = ent["finite_op"]
        states = (0, rep.dim - 1)
    else:
        kfit = None if aux.kind == "verma" or c.n == 2 else 10
        ent["expansion"] = fit_family(lambda K: base.make(c, K=K), site, K_fit=kfit)
        maxlen = sum(c.grad.s) // min(c.grad.s)
        probe_rep = base.make(c, K=c.n * maxlen + 2)
        probe_ops = ent["expansion"].evaluate(probe_rep, site)
        states = (0,)
    zetas = singlet_ratios(c.p, c.n, c.s)
    w = singlet_vector(c.p, site, zetas)
    ent["zetas"], ent["singlet"] = zetas, w
    _CACHE[key] = ent
    ent["F"] = {}
    ent["probe"] = (probe_ops, states)
    return ent


def normalisation(aux: AuxSpec, c: ChainSpec, order: int) -> Tuple[np.ndarray, dict]:
    ent = _entry(aux, c)
    if order not in ent["F"]:
        ops, states = ent["probe"]
        F, diag = normalisation_series([ops] * c.n, ent["zetas"], ent["singlet"], order, c.s, states)
        ent["F"][order] = (F, diag)
    return ent["F"][order]


def aux_blocks(aux: AuxSpec, c: ChainSpec, rep: AffineRep) -> BlockOp:
    ent = _entry(aux, c)
    if aux.kind == "finite":
        op = ent["finite_op"]
        return op if aux.xi is None else _shift_finite(op, ent["site"], aux, c)
    return ent["expansion"].evaluate(rep, ent["site"])


def _shift_finite(op: BlockOp, site: AffineRep, aux: AuxSpec, c: ChainSpec) -> BlockOp:
    from .affine import fundamental_weight_matrix

    B = fundamental_weight_matrix(c.n)
    xi = np.array(aux.xi, dtype=complex)
    blocks = {}
    for (a, b), blk in op.blocks.items():
        fac = c.p.pow(xi[1:] @ B @ site.h[1:, b])
        blocks[(a, b)] = {d: M * fac for d, M in blk.items()}
    return BlockOp(op.aux_dim, op.site_dim, blocks)


# ---------------------------------------------------------------------------
# trace engine

@dataclass
class IntegrabilityOp:
    kind: str
    aux: AuxSpec
    payload: LaurentOp
    meta: dict = field(default_factory=dict)

    def shifted(self, c: complex) -> LaurentOp:
        return op_shift(self.payload, c)


def _diagonal_series(ops: List[BlockOp], zetas: Sequence[complex], dq: int, order: int, nsite: int):
    """Per aux state, per (row, col) of the quantum space: series of diagonal entries of
    X_N(z/zeta_N)...X_1(z/zeta_1).  Returns dict (row, col) -> array (order+1, aux_dim)."""
    ds = ops[0].site_dim if ops else 1
    if nsite == 0:
        return None
    # partial products over the first nsite-1 sites: dict (rows tuple, cols tuple) -> {degree: matrix}
    partial = {((), ()): {0: None}}
    for k in range(nsite - 1):
        op, zk = ops[k], complex(zetas[k])
        nxt = {}
        for (ra, cb), ser in partial.items():
            for (a, b), blk in op.blocks.items():
                out = {}
                for d1, M1 in ser.items():
                    for d2, M2 in blk.items():
                        d = d1 + d2
                        if d > order:
                            continue
                        prod = M2 * zk ** (-d2) if M1 is None else (M2 @ M1) * zk ** (-d2)
                        out[d] = out[d] + prod if d in out else prod
                if out:
                    nxt[(ra + (a,), cb + (b,))] = out
        partial = nxt
    op, zk = ops[nsite - 1], complex(zetas[nsite - 1])
    res = {}
    dim = op.aux_dim
    for (ra, cb), ser in partial.items():
        for (a, b), blk in op.blocks.items():
            acc = np.zeros((order + 1, dim), dtype=complex)
            hit = False
            for d1, M1 in ser.items():
                for d2, M2 in blk.items():
                    d = d1 + d2
                    if d > order:
                        continue
                    if M1 is None:
                        dg = M2.diagonal()
                    else:
                        dg = np.asarray(M2.multiply(M1.T).sum(axis=1)).ravel()
                    acc[d] += dg * zk ** (-d2)
                    hit = True
            if hit:
                row = _flat(ra + (a,), ds)
                col = _flat(cb + (b,), ds)
                res[(row, col)] = acc
    return res


def _flat(multi, d):
    out = 0
    for a in multi:
        out = out * d + a
    return out


def _sector_plan(aux: AuxSpec, c: ChainSpec, K: int):
    """Representations and summation weights realising the trace up to grade K.

    Oscillator factors whose twist ratio exceeds one in modulus are summed by the
    reflection sum_{k>=0} g(k) = -sum_{k<0} g(k) of their exponential-polynomial
    diagonal, evaluated on lattice windows.
    """
    maxlen = sum(c.grad.s) // min(c.grad.s)
    margin = max(c.N, 1) * maxlen + 1
    if aux.kind == "finite":
        rep = aux.make(c)
        return rep, np.ones(rep.dim), np.zeros(rep.dim, dtype=int), {}
    if aux.kind == "verma":
        rep = aux.make(c, K=K + margin)
        grade = np.asarray(rep.module.degree)
        ratios = _twist_ratios_verma(rep, c)
        if np.any(np.abs(ratios) >= 1):
            raise ConvergenceError(f"twist does not damp the Verma trace (ratios {np.abs(ratios)})",
                                   {"ratios": np.abs(ratios).tolist()})
        return rep, np.ones(rep.dim), grade, {"ratios": np.abs(ratios).tolist()}
    probe = aux.make(c, windows=[(0, 1)] * (c.n - 1))
    t = probe.twist_diag(c.phi)
    ratios = []
    for j in range(c.n - 1):
        e = [0] * (c.n - 1)
        e[j] = 1
        idx = int(np.nonzero(np.all(probe.coords == e, axis=1))[0][0])
        ratios.append(t[idx] / t[0])
    ratios = np.array(ratios)
    if np.any(np.isclose(np.abs(ratios), 1.0, atol=1e-6)):
        raise ConvergenceError("twist ratio of modulus one: oscillator trace does not converge",
                               {"ratios": np.abs(ratios).tolist()})
    refl = np.abs(ratios) > 1
    windows = [(-K - 1 - margin, margin) if r else (0, K + margin) for r in refl]
    rep = aux.make(c, windows=windows)
    k = rep.coords
    inside = np.all(np.where(refl, k <= -1, k >= 0), axis=1)
    grade = np.where(refl, -k - 1, k).sum(axis=1)
    weight = np.where(inside, (-1.0) ** refl.sum(), 0.0)
    return rep, weight, grade, {"ratios": np.abs(ratios).tolist(), "reflected": refl.tolist()}


def _twist_ratios_verma(rep: AffineRep, c: ChainSpec):
    t = rep.twist_diag(c.phi)
    basis = rep.coords
    out = []
    for j in range(basis.shape[1]):
        e = np.zeros(basis.shape[1], dtype=int)
        e[j] = 1
        hit = np.nonzero(np.all(basis == e, axis=1))[0]
        if hit.size:
            out.append(t[hit[0]] / t[0])
    return np.array(out)


def build_trace(aux: AuxSpec, c: ChainSpec, K: Optional[int] = None, schedule: Optional[Sequence[int]] = None,
                order: Optional[int] = None, tol: float = 1e-9, strict: bool = True) -> IntegrabilityOp:
    """tr_aux((t (x) 1) M(zeta)) normalised universally, as a power series through `order`."""
    order = c.order if order is None else order
    if aux.kind == "finite":
        K = 0
    else:
        K = K or (32 if aux.kind == "verma" else 48)
    rep, weight, grade, info = _sector_plan(aux, c, K)
    t = rep.twist_diag(c.phi)
    dq = c.dim
    if c.N == 0:
        diag = {(0, 0): np.ones((1, rep.dim), dtype=complex)}
        series_order = 0
    else:
        ops = [aux_blocks(aux, c, rep)] * c.N
        diag = _diagonal_series(ops, c.inhom, dq, order, c.N)
        series_order = order
    schedule = list(schedule) if schedule is not None else ([K // 4, K // 2, K] if K else [0])
    results = {}
    for KK in schedule:
        sel = (grade <= KK) * weight * t
        coeffs = np.zeros((series_order + 1, dq, dq), dtype=complex)
        for (r, col), acc in diag.items():
            coeffs[:, r, col] = acc[: series_order + 1] @ sel
        results[KK] = coeffs
    coeffs = results[schedule[-1]]
    deltas = [float(np.abs(results[b] - results[a]).max()) for a, b in zip(schedule, schedule[1:])]
    meta = {"K": K, "schedule": schedule, "cauchy_deltas": deltas, **info}
    if c.N > 0:
        F, ninfo = normalisation(aux, c, order)
        meta.update({"Y0": ninfo["Y0"], "scalar_spread": ninfo["scalar_spread"]})
        pref = np.zeros(order + 1, dtype=complex)
        pref[0] = 1.0
        for z in c.inhom:
            pref = np.convolve(pref, F * complex(z) ** (-np.arange(order + 1)))[: order + 1]
        out = np.zeros_like(coeffs)
        for m in range(order + 1):
            out[m] = sum(pref[j] * coeffs[m - j] for j in range(m + 1))
        payload = LaurentOp(out, 0, order)
    else:
        payload = LaurentOp(coeffs, 0, None)
    if deltas and aux.kind != "finite":
        scale = max(np.abs(coeffs).max(), 1e-300)
        meta["error_estimate"] = _tail_estimate(deltas)
        meta["converged"] = meta["error_estimate"] / scale <= tol
        if strict and not meta["converged"]:
            raise ConvergenceError(f"{aux.describe()}: trace not converged (deltas {deltas})", meta)
    kind = {"finite": "T_finite", "verma": "T_verma", "osc": "Qbar" if aux.barred else "Q"}[aux.kind]
    return IntegrabilityOp(kind, aux, payload, meta)


def _tail_estimate(deltas):
    """Remaining truncation error after the last schedule step, assuming geometric decay."""
    if len(deltas) < 2 or deltas[-2] == 0:
        return deltas[-1]
    rate = deltas[-1] / deltas[-2]
    return deltas[-1] if rate >= 1 else deltas[-1] * rate / (1 - rate)


def build_T(kind: str, lam, c: ChainSpec, K: Optional[int] = None, xi=None, **kw) -> IntegrabilityOp:
    if kind in ("finite", "T_finite"):
        aux = AuxSpec("finite", tuple(lam), xi=None if xi is None else tuple(xi))
    elif kind in ("verma", "T_verma"):
        aux = verma_T(lam, xi)
    elif kind in ("barred", "T_barred"):
        aux = AuxSpec("finite", tuple(lam), barred=True)
    else:
        raise ValueError(f"unknown transfer kind {kind!r}")
    return build_trace(aux, c, K=K, **kw)


def build_Q(i: int, barred: bool, c: ChainSpec, K: Optional[int] = None, **kw) -> IntegrabilityOp:
    return build_trace(osc_Q(i, barred), c, K=K, **kw)


def build_monodromy(aux: AuxSpec, c: ChainSpec, K: Optional[int] = None) -> LaurentOp:
    """Normalised monodromy X_N(zeta/zeta_N)...X_1(zeta/zeta_1) on aux (x) quantum space (polynomial part)."""
    rep = aux.make(c) if aux.kind == "finite" else aux.make(c, K=K or 6)
    da = rep.dim
    dq = c.dim
    if c.N == 0:
        return LaurentOp.identity(da)
    op = aux_blocks(aux, c, rep).to_laurent()
    total = None
    ds = c.n
    for k, z in enumerate(c.inhom):
        Xk = op_shift(op, 1.0 / z)
        # embed aux (x) site_k into aux (x) site_1 .. site_N
        left = ds ** k
        right = ds ** (c.N - k - 1)
        emb = _embed(Xk, da, ds, left, right)
        total = emb if total is None else emb @ total
    return total


def _embed(X: LaurentOp, da: int, ds: int, left: int, right: int) -> LaurentOp:
    coeffs = []
    for d, C in X.terms():
        C4 = C.reshape(da, ds, da, ds)
        big = np.einsum("xayb,lm,rs->xlarymbs", C4, np.eye(left), np.eye(right))
        n = da * left * ds * right
        coeffs.append((d, big.reshape(n, n)))
    return LaurentOp.from_dict(dict(coeffs), da * left * ds * right)


# ---------------------------------------------------------------------------
# q-limit check (n = 2)

def q_limit_check(c: ChainSpec, mus: Sequence[int] = (8, 16, 32), K: int = 40, Q: Optional[LaurentOp] = None) -> dict:
    """Distance between T~^{(mu,0)}(q^{-1/s} zeta) q^{mu(phi_0 - phi_1)/2 - mu h_1/2} and Q_2(zeta).

    The Verma trace converges to the oscillator trace as mu grows only when |q| > 1.  One
    scalar calibration is fitted on the (0,0) entry; distances are relative to max|Q_2|.
    On the scalar quantum space (N = 0) the calibration absorbs everything, so the
    uncalibrated distances are reported; there the identity holds at every mu.
    """
    if c.n != 2:
        raise ValueError("the limit check is implemented for n = 2")
    if abs(c.p.q) <= 1:
        raise ValueError("the limit needs |q| > 1, i.e. Re hbar > 0")
    Q = build_Q(2, False, c).payload if Q is None else Q
    phi = c.phi.phi
    dists, raw, cals, deltas = [], [], [], []
    for mu in mus:
        T = build_T("verma", (mu, 0), c, K=K, strict=False)
        deltas.append(T.meta["cauchy_deltas"])
        Tm = op_shift(T.payload, c.p.pow(-1.0 / c.s))
        fac = c.p.pow(mu * (phi[0] - phi[1]) / 2 - mu * c.cartan(1) / 2)
        lhs = LaurentOp(np.asarray(Tm.coeffs) * fac[None, :, None], Tm.dmin, Tm.order)
        kappa = complex(Q.coeff(0)[0, 0] / lhs.coeff(0)[0, 0])
        cals.append(kappa)
        dists.append(float((lhs * kappa - Q).norm() / Q.norm()))
        raw.append(float((lhs - Q).norm() / Q.norm()))
    if c.N == 0:
        dists = raw
    mono = all(a > b for a, b in zip(dists, dists[1:]))
    return {"mus": list(mus), "distances": dists, "uncalibrated": raw, "calibration": cals, "monotone": mono,
            "cauchy_deltas": deltas}


# ---------------------------------------------------------------------------
# export

def export_dict(op: LaurentOp, kind: str = "", label: str = "") -> dict:
    """Plain-data form: dimension, degree window and nonzero entries as (exponent, re, im) triples."""
    entries = []
    for i in range(op.dim):
        for j in range(op.dim):
            trip = [[int(d), float(C[i, j].real), float(C[i, j].imag)] for d, C in op.terms() if C[i, j] != 0]
            if trip:
                entries.append({"row": i, "col": j, "terms": trip})
    return {"kind": kind, "label": label, "dim": op.dim, "dmin": int(op.dmin), "dmax": int(op.dmax),
            "order": op.order, "entries": entries}


def import_dict(d: dict) -> LaurentOp:
    terms: Dict[int, np.ndarray] = {}
    for ent in d["entries"]:
        for k, re, im in ent["terms"]:
            terms.setdefault(k, np.zeros((d["dim"], d["dim"]), dtype=complex))[ent["row"], ent["col"]] = re + 1j * im
    return LaurentOp.from_dict(terms, d["dim"], d["order"])
