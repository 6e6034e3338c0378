"""Evaluation and shifted representations of U_q(L(sl_n)) built through Jimbo's map."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .core import QParams, qbinom
from .glmod import FINITE, GLModule, Weight, build_gl

BIG_ROOM = 10**6


class BorelViolation(ValueError):
    """Requested an f-generator from a representation of the positive Borel subalgebra only."""


@dataclass(frozen=True)
class GradationS:
    s: tuple

    def __post_init__(self):
        s = tuple(int(x) for x in self.s)
        if sum(s) == 0:
            raise ValueError("the gradation needs a nonzero total s = sum(s_i)")
        object.__setattr__(self, "s", s)

    @property
    def total(self) -> int:
        return sum(self.s)

    @classmethod
    def default(cls, n: int):
        return cls((1,) * n)


@dataclass(frozen=True)
class TwistPhi:
    phi: tuple

    def __post_init__(self):
        phi = tuple(complex(x) for x in self.phi)
        if abs(sum(phi)) > 1e-12:
            raise ValueError(f"twist parameters must satisfy sum(phi_i) = 0, got sum = {sum(phi):.3g}")
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return len(self.phi)


def cartan_matrix_affine(n: int) -> np.ndarray:
    """Generalized Cartan matrix of type A^(1)_(n-1); for n = 2 the off-diagonal entries are -2."""
    a = 2 * np.eye(n, dtype=int)
    for i in range(n):
        a[i, (i + 1) % n] -= 1
        a[i, (i - 1) % n] -= 1
    return a


def fundamental_weight_matrix(n: int) -> np.ndarray:
    """Inverse finite Cartan matrix, used in the Cartan factor q^{sum B_ij h_i (x) h_j}."""
    A = 2 * np.eye(n - 1) - np.eye(n - 1, k=1) - np.eye(n - 1, k=-1)
    return np.linalg.inv(A)


@dataclass(frozen=True, eq=False)
class AffineRep:
    """Matrices of a representation of U_q(L(sl_n)) or of its positive Borel subalgebra.

    e[i] is the constant matrix multiplying zeta**s[i]; f[i] multiplies zeta**(-s[i]).
    h[i] holds the eigenvalues of h_i (shift included) on the diagonal basis.
    """

    p: QParams
    n: int
    e: tuple
    f: Optional[tuple]
    h: np.ndarray
    s: tuple
    label: str = ""
    room: np.ndarray = None  # steps each basis state may move before hitting a truncation edge
    coords: Optional[np.ndarray] = None  # lattice coordinates of basis states (infinite families)
    module: Optional[object] = None
    xi: tuple = None

    @property
    def dim(self) -> int:
        return self.h.shape[1]

    @property
    def borel(self) -> bool:
        return self.f is None

    def finite(self) -> bool:
        return bool(np.all(self.room >= BIG_ROOM))

    def qh(self, coeffs, nu=1.0) -> np.ndarray:
        """Diagonal of q^{nu * sum_i coeffs[i] h_i}."""
        expo = np.tensordot(np.asarray(coeffs, dtype=complex), self.h, axes=1)
        return self.p.pow(nu * expo)

    def e_at(self, i: int, zeta) -> sp.csr_matrix:
        return self.e[i] * complex(zeta) ** self.s[i]

    def f_at(self, i: int, zeta) -> sp.csr_matrix:
        if self.f is None:
            raise BorelViolation(f"{self.label}: f_{i} is not represented (positive Borel only)")
        return self.f[i] * complex(zeta) ** (-self.s[i])

    def twist_diag(self, phi: TwistPhi) -> np.ndarray:
        """Image of t = q^{sum phi_i h_i / n}."""
        return self.qh(np.array(phi.phi) / self.n)

    def with_shift(self, xi) -> "AffineRep":
        xi = tuple(complex(x) for x in xi)
        if len(xi) != self.n:
            raise ValueError("shift needs one value xi(h_i) per Cartan generator")
        h = self.h + np.array(xi)[:, None]
        base = self.xi or (0,) * self.n
        tot = tuple(a + b for a, b in zip(base, xi))
        f = self.f if all(x == 0 for x in xi) else None
        return replace(self, h=h, f=f, xi=tot, label=self.label + f"[xi={_short(xi)}]")


def _short(v):
    return "(" + ",".join(f"{complex(x).real:g}" + (f"{complex(x).imag:+g}j" if complex(x).imag else "") for x in v) + ")"


# ---------------------------------------------------------------------------
# Jimbo's homomorphism

def jimbo_image(n: int, gen: str) -> Callable[[GLModule], object]:
    """Recipe mapping a generator label ('e0', 'f2', 'h1') to its image in a gl_n module.

    Cartan labels return the coefficient vector c with h_i -> sum_j c_j G_j.
    """
    if n not in (2, 3):
        raise ValueError("Jimbo images are tabulated for n = 2, 3")
    kind, idx = gen[0], int(gen[1:]) if gen[1:].isdigit() else -1
    if kind not in "efh" or not 0 <= idx < n:
        raise KeyError(f"unknown generator {gen!r} for n = {n}")
    if kind == "h":
        c = np.zeros(n)
        if idx == 0:
            c[0], c[n - 1] = -1.0, 1.0
        else:
            c[idx - 1], c[idx] = 1.0, -1.0
        return lambda m: c
    if n == 2:
        table = {
            "e0": lambda m: m.F[0] @ m.qG([-1, -1]),
            "e1": lambda m: m.E[0],
            "f0": lambda m: m.E[0] @ m.qG([1, 1]),
            "f1": lambda m: m.F[0],
        }
    else:
        table = {
            "e0": lambda m: m.F3 @ m.qG([-1, 0, -1]),
            "e1": lambda m: m.E[0],
            "e2": lambda m: m.E[1],
            "f0": lambda m: m.E3 @ m.qG([1, 0, 1]),
            "f1": lambda m: m.F[0],
            "f2": lambda m: m.F[1],
        }
    return table[gen]


def eval_rep(p: QParams, lam, kind: str = FINITE, K: Optional[int] = None,
             grad: Optional[GradationS] = None, xi=None, module: Optional[GLModule] = None) -> AffineRep:
    """phi^lambda_zeta = pi^lambda o phi o Gamma_zeta, optionally shifted by xi."""
    m = module if module is not None else build_gl(p, lam, kind, K)
    n = m.n
    grad = grad or GradationS.default(n)
    if len(grad.s) != n:
        raise ValueError("gradation length must equal n")
    e = tuple(sp.csr_matrix(jimbo_image(n, f"e{i}")(m)) for i in range(n))
    f = tuple(sp.csr_matrix(jimbo_image(n, f"f{i}")(m)) for i in range(n))
    h = np.array([np.tensordot(jimbo_image(n, f"h{i}")(m), m.G, axes=1) for i in range(n)], dtype=complex)
    room = np.full(m.dim, BIG_ROOM) if m.kind == FINITE else m.room()
    coords = None if m.kind == FINITE else np.array(m.basis)
    tag = "pi" if m.kind == FINITE else "verma"
    rep = AffineRep(p, n, e, f, h, grad.s, label=f"{tag}{m.weight!r}", room=room, coords=coords,
                    module=m, xi=(0,) * n)
    if xi is not None:
        rep = rep.with_shift(xi)
    return rep


def fundamental_rep(p: QParams, n: int, grad: Optional[GradationS] = None) -> AffineRep:
    lam = (1,) + (0,) * (n - 1)
    return eval_rep(p, lam, FINITE, grad=grad)


# ---------------------------------------------------------------------------
# automorphisms of the Dynkin diagram as index maps

def apply_sigma(i: int, power: int, n: int) -> int:
    """sigma^power on generator index i (sigma: alpha_i -> alpha_(i+1))."""
    return (i + power) % n


def apply_tau(i: int, n: int) -> int:
    """tau: alpha_i -> alpha_(n-i), alpha_0 fixed."""
    return (-i) % n


def relabel(rep: AffineRep, index_map: Sequence[int], label: str = "") -> AffineRep:
    """Representation a -> rep(g(a)) where g sends generator j to generator index_map[j]."""
    e = tuple(rep.e[index_map[j]] for j in range(rep.n))
    f = None if rep.f is None else tuple(rep.f[index_map[j]] for j in range(rep.n))
    h = rep.h[list(index_map)]
    return replace(rep, e=e, f=f, h=h, label=label or rep.label)


def barred_rep(rep: AffineRep) -> AffineRep:
    """rep o tau o (e_i, f_i -> -e_i, -f_i): the barred counterpart of a representation.

    The sign automorphism only matters for odd n, where it sends zeta^s to -zeta^s.
    """
    return sign_flip(relabel(rep, [apply_tau(j, rep.n) for j in range(rep.n)], label="bar " + rep.label))


def rescale_e(rep: AffineRep, c) -> AffineRep:
    """e_i -> c_i e_i, f_i -> f_i / c_i.

    With prod c_i = 1 this is conjugation by q^y for a Cartan element y, so traces of
    twisted monodromies do not change; it is used to balance the entry scales of
    modules with large weights.
    """
    c = np.asarray(c, dtype=complex)
    if abs(np.prod(c) - 1) > 1e-12:
        raise ValueError("rescaling factors must multiply to one")
    e = tuple(ci * x for ci, x in zip(c, rep.e))
    f = None if rep.f is None else tuple(x / ci for ci, x in zip(c, rep.f))
    return replace(rep, e=e, f=f)


def balancing_factors(rep: AffineRep) -> np.ndarray:
    """Factors c_i (prod = 1) that equalise the largest entries of the e_i."""
    norms = np.array([np.abs(sp.csr_matrix(x).data).max() for x in rep.e])
    c = np.exp(np.log(norms).mean()) / norms
    return c / np.prod(c) ** (1.0 / len(c))


def sign_flip(rep: AffineRep) -> AffineRep:
    e = tuple(-x for x in rep.e)
    f = None if rep.f is None else tuple(-x for x in rep.f)
    return replace(rep, e=e, f=f)


# ---------------------------------------------------------------------------
# relation checks

def _safe(rep: AffineRep, steps: int) -> np.ndarray:
    return np.nonzero(rep.room >= steps)[0]


def _res(A, cols) -> float:
    A = sp.csr_matrix(A)[:, cols]
    return float(np.abs(A.data).max()) if A.nnz else 0.0


def affine_relation_residuals(rep: AffineRep, zetas=None, rng=None) -> dict:
    """Cartan, [e, f] and q-Serre residuals; the f-side is skipped for Borel-only representations."""
    n, p = rep.n, rep.p
    rng = np.random.default_rng(0) if rng is None else rng
    if zetas is None:
        zetas = np.exp(rng.uniform(-0.5, 0.5, 3) + 1j * rng.uniform(0, 2 * np.pi, 3))
    A = cartan_matrix_affine(n)
    out = {}
    c1 = _safe(rep, 1)
    for i in range(n):
        for j in range(n):
            nu = 0.7 - 0.2j
            d = rep.qh(np.eye(n)[j], nu)
            for g, sign, tag in ((rep.e, 1, "e"), (rep.f, -1, "f")):
                if g is None:
                    continue
                M = sp.diags(d) @ g[i] @ sp.diags(1 / d) - p.pow(sign * nu * A[j, i]) * g[i]
                out[f"cartan {tag}{i} h{j}"] = _res(M, c1)
    c2 = _safe(rep, 2)
    if rep.f is not None:
        for z in zetas:
            for i in range(n):
                for j in range(n):
                    M = rep.e_at(i, z) @ rep.f_at(j, z) - rep.f_at(j, z) @ rep.e_at(i, z)
                    if i == j:
                        M = M - sp.diags(rep.qh(np.eye(n)[i]) - rep.qh(np.eye(n)[i], -1)) / p.kappa
                    key = f"[e{i},f{j}]"
                    out[key] = max(out.get(key, 0.0), _res(M, c2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            m = 1 - A[i, j]
            cols = _safe(rep, m + 1)
            for tag, gens in (("serre e", rep.e), ("serre f", rep.f)):
                if gens is None:
                    continue
                for z in zetas:
                    sgn = 1 if tag == "serre e" else -1
                    gi = gens[i] * complex(z) ** (sgn * rep.s[i])
                    gj = gens[j] * complex(z) ** (sgn * rep.s[j])
                    tot = None
                    for k in range(m + 1):
                        term = (-1) ** k * qbinom(p, m, k) * (_mpow(gi, m - k) @ gj @ _mpow(gi, k))
                        tot = term if tot is None else tot + term
                    key = f"{tag} ({i},{j})"
                    out[key] = max(out.get(key, 0.0), _res(tot, cols))
    return out


def _mpow(M, k):
    out = sp.identity(M.shape[0], dtype=complex, format="csr")
    for _ in range(k):
        out = out @ M
    return out


def check_affine_relations(rep: AffineRep, zetas=None) -> float:
    return max(affine_relation_residuals(rep, zetas).values())


def antipode_check(rep: AffineRep) -> float:
    """m o (S (x) id) o Delta(e_i) = epsilon(e_i) = 0, with S(e_i) = -q^{h_i} e_i, S(q^x) = q^-x."""
    worst = 0.0
    for i in range(rep.n):
        qhi = sp.diags(rep.qh(np.eye(rep.n)[i]))
        # Delta(e_i) = e_i (x) 1 + q^{-h_i} (x) e_i  ->  S(e_i) + S(q^{-h_i}) e_i
        M = -(qhi @ rep.e[i]) + qhi @ rep.e[i]
        worst = max(worst, _res(M, np.arange(rep.dim)))
    return worst


ANTIPODE = {"q^x": "q^-x", "e_i": "-q^{h_i} e_i", "f_i": "-f_i q^{-h_i}"}
COUNIT = {"q^x": 1, "e_i": 0, "f_i": 0}
