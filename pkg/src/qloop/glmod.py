"""Highest-weight modules of U_q(gl_n), n = 2, 3: truncated Verma modules and their
finite-dimensional quotients."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import QParams, qnum

FINITE, VERMA = "finite", "verma"


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class Weight:
    comps: tuple

    def __post_init__(self):
        c = tuple(complex(x) if isinstance(x, complex) else x for x in self.comps)
        if len(c) not in (2, 3):
            raise WeightError(f"only gl_2 and gl_3 weights are supported, got {len(c)} components")
        object.__setattr__(self, "comps", c)

    @property
    def n(self) -> int:
        return len(self.comps)

    def diff(self, i: int, j: int):
        """lambda_i - lambda_j with 1-based indices."""
        return self.comps[i - 1] - self.comps[j - 1]

    def dominant_integral(self) -> bool:
        for i in range(1, self.n):
            d = self.diff(i, i + 1)
            if abs(complex(d).imag) > 1e-12 or abs(complex(d).real - round(complex(d).real)) > 1e-12:
                return False
            if round(complex(d).real) < 0:
                return False
        return True

    def int_diff(self, i: int, j: int) -> int:
        return int(round(complex(self.diff(i, j)).real))

    def __iter__(self):
        return iter(self.comps)

    def __repr__(self):
        return "(" + ", ".join(_fmt(c) for c in self.comps) + ")"


def _fmt(x):
    x = complex(x)
    if x.imag == 0:
        r = x.real
        return str(int(r)) if r == int(r) else f"{r:g}"
    return f"{x:g}"


def weyl_dimension(lam: Weight) -> int:
    n = lam.n
    num, den = Fraction(1), Fraction(1)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            num *= lam.int_diff(i, j) + j - i
            den *= j - i
    return int(num / den)


@dataclass(frozen=True, eq=False)
class GLModule:
    weight: Weight
    kind: str
    K: Optional[int]
    basis: tuple  # tuples k (n=2: (k,), n=3: (k1, k3, k2)); for finite n=3 quotients, labels
    E: tuple  # sparse matrices E_1..E_{n-1}
    F: tuple
    G: np.ndarray  # (n, dim) eigenvalues of G_1..G_n
    E3: Optional[sp.csr_matrix] = None
    F3: Optional[sp.csr_matrix] = None
    degree: np.ndarray = field(default=None)  # total degree of each basis state
    p: Optional[QParams] = None

    @property
    def n(self) -> int:
        return self.weight.n

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    def qG(self, coeffs, nu=1.0) -> sp.dia_matrix:
        """Diagonal matrix of q^{nu * sum_i coeffs[i] G_{i+1}}."""
        expo = np.tensordot(np.asarray(coeffs, dtype=complex), self.G, axes=1)
        return sp.diags(self.p.pow(nu * expo)).tocsr()

    def room(self) -> np.ndarray:
        """How many degree-raising steps each state can take without leaving the truncation."""
        if self.kind == FINITE:
            return np.full(self.dim, 10**6)
        return self.K - self.degree

    def to_json(self) -> str:
        def enc(m):
            m = sp.coo_matrix(m)
            return [[int(r), int(c), float(v.real), float(v.imag)] for r, c, v in zip(m.row, m.col, m.data)]

        d = {
            "weight": [[complex(c).real, complex(c).imag] for c in self.weight],
            "kind": self.kind,
            "K": self.K,
            "dim": self.dim,
            "E": [enc(m) for m in self.E],
            "F": [enc(m) for m in self.F],
            "G": [[[float(x.real), float(x.imag)] for x in row] for row in self.G],
        }
        return json.dumps(d, sort_keys=True)


def _check_finite(lam: Weight):
    if not lam.dominant_integral():
        raise WeightError(f"weight {lam} is not dominant integral; finite-dimensional module needs "
                          "non-negative integer differences lambda_i - lambda_(i+1)")


def build_gl2(p: QParams, lam, kind: str = VERMA, K: Optional[int] = None) -> GLModule:
    lam = lam if isinstance(lam, Weight) else Weight(tuple(lam))
    if lam.n != 2:
        raise WeightError("build_gl2 needs a two-component weight")
    l1, l2 = (complex(x) for x in lam)
    if kind == FINITE:
        _check_finite(lam)
        top = lam.int_diff(1, 2)
    elif kind == VERMA:
        if K is None or K < 1:
            raise ValueError("Verma module needs a truncation K >= 1")
        top = K
    else:
        raise ValueError(f"unknown module kind {kind!r}")
    ks = np.arange(top + 1)
    dim = top + 1
    F = sp.diags(np.ones(dim - 1, dtype=complex), -1, shape=(dim, dim)).tocsr()
    Ev = qnum(p, ks[1:]) * qnum(p, l1 - l2 - ks[1:] + 1)
    E = sp.diags(Ev, 1, shape=(dim, dim)).tocsr()
    G = np.array([l1 - ks, l2 + ks], dtype=complex)
    return GLModule(lam, kind, K if kind == VERMA else None, tuple((int(k),) for k in ks),
                    (E,), (F,), G, degree=ks.copy(), p=p)


def gl3_basis(K: int):
    """Graded-lexicographic list of (k1, k3, k2) with k1 + k3 + k2 <= K."""
    out = []
    for d in range(K + 1):
        for k1 in range(d, -1, -1):
            for k3 in range(d - k1, -1, -1):
                out.append((k1, k3, d - k1 - k3))
    return out


def _gl3_verma(p: QParams, lam: Weight, K: int):
    l1, l2, l3 = (complex(x) for x in lam)
    l12, l23, l13 = l1 - l2, l2 - l3, l1 - l3
    basis = gl3_basis(K)
    index = {k: i for i, k in enumerate(basis)}
    dim = len(basis)
    qn = lambda x: qnum(p, x)
    qp = p.pow

    mats = {name: sp.lil_matrix((dim, dim), dtype=complex) for name in ("E1", "E2", "E3", "F1", "F2", "F3")}

    def put(name, target, col, val):
        j = index.get(target)
        if j is not None and val != 0:
            mats[name][j, col] += val

    for c, (k1, k3, k2) in enumerate(basis):
        put("F1", (k1 + 1, k3, k2), c, 1.0)
        put("F2", (k1, k3, k2 + 1), c, qp(k1 - k3))
        if k1 > 0:
            put("F2", (k1 - 1, k3 + 1, k2), c, qn(k1))
        put("F3", (k1, k3 + 1, k2), c, qp(-k1))
        if k1 > 0:
            put("E1", (k1 - 1, k3, k2), c, qn(l12 - k1 + k2 - k3 + 1) * qn(k1))
        if k3 > 0:
            # the F_3 factor is what E_1 removes here, so the q-number counts k3
            put("E1", (k1, k3 - 1, k2 + 1), c, -qp(l12 + k2 - k3 + 2) * qn(k3))
        if k2 > 0:
            put("E2", (k1, k3, k2 - 1), c, qn(l23 - k2 + 1) * qn(k2))
        if k3 > 0:
            put("E2", (k1 + 1, k3 - 1, k2), c, qp(-l23 + 2 * k2) * qn(k3))
            put("E3", (k1, k3 - 1, k2), c, qp(k1) * qn(l13 - k1 - k2 - k3 + 1) * qn(k3))
        if k1 > 0 and k2 > 0:
            put("E3", (k1 - 1, k3, k2 - 1), c,
                -qp(-l12 + k1 - k2 + k3 - 1) * qn(l23 - k2 + 1) * qn(k1) * qn(k2))
    mats = {k: v.tocsr() for k, v in mats.items()}
    ar = np.array(basis)
    k1, k3, k2 = ar[:, 0], ar[:, 1], ar[:, 2]
    G = np.array([l1 - k1 - k3, l2 + k1 - k2, l3 + k2 + k3], dtype=complex)
    return basis, mats, G, ar.sum(axis=1)


def build_gl3(p: QParams, lam, kind: str = VERMA, K: Optional[int] = None) -> GLModule:
    lam = lam if isinstance(lam, Weight) else Weight(tuple(lam))
    if lam.n != 3:
        raise WeightError("build_gl3 needs a three-component weight")
    if kind == VERMA:
        if K is None or K < 1:
            raise ValueError("Verma module needs a truncation K >= 1")
        basis, m, G, deg = _gl3_verma(p, lam, K)
        return GLModule(lam, VERMA, K, tuple(basis), (m["E1"], m["E2"]), (m["F1"], m["F2"]), G,
                        E3=m["E3"], F3=m["F3"], degree=deg, p=p)
    if kind != FINITE:
        raise ValueError(f"unknown module kind {kind!r}")
    _check_finite(lam)
    return _gl3_quotient(p, lam)


def _gl3_quotient(p: QParams, lam: Weight, rtol: float = 1e-9) -> GLModule:
    """V^lambda as the Verma module modulo its maximal submodule.

    A vector of weight mu below the top lies in the maximal submodule iff every E_i
    maps it into the maximal submodule; we propagate orthonormal complements downward.
    """
    D = 2 * lam.int_diff(1, 3)  # alpha-degree of the lowest weight
    basis, m, G, deg = _gl3_verma(p, lam, max(D, 1))
    ar = np.array(basis)
    # weight label by (a1, a2): mu = lambda - a1*alpha1 - a2*alpha2
    a1 = ar[:, 0] + ar[:, 1]
    a2 = ar[:, 2] + ar[:, 1]
    groups = {}
    for idx, key in enumerate(zip(a1, a2)):
        groups.setdefault(key, []).append(idx)
    order = sorted(groups, key=lambda k: (k[0] + k[1], k))
    comp = {}  # weight key -> (indices, Q) with Q columns an orthonormal basis of the complement
    E1, E2 = m["E1"].toarray(), m["E2"].toarray()
    for key in order:
        idx = groups[key]
        if key == (0, 0):
            comp[key] = (idx, np.eye(1, dtype=complex))
            continue
        rows = []
        for Em, up in ((E1, (key[0] - 1, key[1])), (E2, (key[0], key[1] - 1))):
            if up in comp and comp[up][1].shape[1]:
                uidx, Q = comp[up]
                rows.append(Q.conj().T @ Em[np.ix_(uidx, idx)])
        if not rows:
            comp[key] = (idx, np.zeros((len(idx), 0), dtype=complex))
            continue
        A = np.vstack(rows)
        _, sv, vh = np.linalg.svd(A)
        r = int(np.sum(sv > rtol * max(1.0, sv.max() if sv.size else 0)))
        comp[key] = (idx, vh[:r].conj().T)
    # assemble the isometry J: quotient coordinates -> Verma coordinates
    cols, labels = [], []
    for key in order:
        idx, Q = comp[key]
        for j in range(Q.shape[1]):
            v = np.zeros(len(basis), dtype=complex)
            v[idx] = Q[:, j]
            cols.append(v)
            labels.append((int(key[0]), int(key[1]), j))
    J = np.array(cols).T
    proj = lambda M: sp.csr_matrix(_clean(J.conj().T @ M.toarray() @ J))
    Gq = np.array([np.real_if_close(J.conj().T @ np.diag(g) @ J).diagonal() for g in G], dtype=complex)
    degq = np.array([lab[0] + lab[1] for lab in labels])
    return GLModule(lam, FINITE, None, tuple(labels), (proj(m["E1"]), proj(m["E2"])),
                    (proj(m["F1"]), proj(m["F2"])), Gq, E3=proj(m["E3"]), F3=proj(m["F3"]),
                    degree=degq, p=p)


def _clean(a, tol=1e-14):
    a = np.array(a)
    a[np.abs(a) < tol * max(1.0, np.abs(a).max())] = 0
    return a


def build_gl(p: QParams, lam, kind: str = VERMA, K: Optional[int] = None) -> GLModule:
    lam = lam if isinstance(lam, Weight) else Weight(tuple(lam))
    return (build_gl2 if lam.n == 2 else build_gl3)(p, lam, kind, K)


# ---------------------------------------------------------------------------
# relation checks

def _safe_cols(m: GLModule, steps: int) -> np.ndarray:
    return np.nonzero(m.room() >= steps)[0]


def _res(A, cols) -> float:
    A = sp.csr_matrix(A)[:, cols]
    return float(np.abs(A.toarray()).max()) if A.nnz else 0.0


def gl_relation_residuals(m: GLModule) -> dict:
    """Residuals of the U_q(gl_n) defining relations, on truncation-safe columns."""
    p, n = m.p, m.n
    out = {}
    c = lambda i, j: (1 if i == j else -1 if i == j + 1 else 0)  # alpha_j(G_i), 1-based
    cols1, cols2, cols3 = (_safe_cols(m, s) for s in (1, 2, 3))
    for i in range(1, n):
        Ei, Fi = m.E[i - 1], m.F[i - 1]
        for j in range(1, n + 1):
            X = np.zeros(n)
            X[j - 1] = 1.0
            a = c(j, i)
            qX, qmX = m.qG(X), m.qG(X, -1.0)
            out[f"cartan E{i} G{j}"] = _res(qX @ Ei @ qmX - p.pow(a) * Ei, cols1)
            out[f"cartan F{i} G{j}"] = _res(qX @ Fi @ qmX - p.pow(-a) * Fi, cols1)
        for j in range(1, n):
            Ej, Fj = m.E[j - 1], m.F[j - 1]
            comm = Ei @ Fj - Fj @ Ei
            if i == j:
                X = np.zeros(n)
                X[i - 1], X[i] = 1.0, -1.0
                comm = comm - (m.qG(X) - m.qG(X, -1.0)) / p.kappa
            out[f"[E{i},F{j}]"] = _res(comm, cols2)
    if n == 3:
        b2 = qnum(p, 2)
        for (X, Y, tag) in ((m.E[0], m.E[1], "E"), (m.F[0], m.F[1], "F")):
            for A, B, lab in ((X, Y, "1,2"), (Y, X, "2,1")):
                r = A @ A @ B - b2 * (A @ B @ A) + B @ A @ A
                out[f"serre {tag} {lab}"] = _res(r, cols3)
        # composite root vectors
        if m.F3 is not None:
            out["F3 = F2F1 - qF1F2"] = _res(m.F3 - (m.F[1] @ m.F[0] - p.q * (m.F[0] @ m.F[1])), cols2)
            out["E3 = E1E2 - q^-1E2E1"] = _res(m.E3 - (m.E[0] @ m.E[1] - (m.E[1] @ m.E[0]) / p.q), cols2)
    return out


def check_gl_relations(m: GLModule) -> float:
    return max(gl_relation_residuals(m).values())
