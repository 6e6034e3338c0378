"""q-oscillators, their Fock modules and the Borel representations rho_i, rho-bar_i."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .affine import AffineRep, BorelViolation, GradationS, apply_sigma, apply_tau
from .core import QParams, qnum


@dataclass(frozen=True, eq=False)
class FockModule:
    """Span of v_k for k in `levels` (consecutive integers).

    levels = 0..K is the Fock module truncated at K.  Windows reaching below zero
    realise the same algebraic formulas on the lattice Z; they are used for the
    analytic continuation of divergent traces.
    """

    p: QParams
    levels: np.ndarray
    b: sp.csr_matrix
    bdag: sp.csr_matrix

    @property
    def K(self) -> int:
        return int(self.levels[-1])

    @property
    def dim(self) -> int:
        return len(self.levels)

    def qN(self, nu=1.0) -> np.ndarray:
        return self.p.pow(nu * self.levels)

    def room(self) -> np.ndarray:
        """Distance to the nearest artificial edge of the window."""
        top = self.levels[-1] - self.levels
        if self.levels[0] == 0:
            return top  # v_{-1} = 0 is a genuine edge
        return np.minimum(top, self.levels - self.levels[0])


def build_fock(p: QParams, K: int, lo: int = 0) -> FockModule:
    if K < lo + 1:
        raise ValueError("Fock truncation needs at least two states")
    levels = np.arange(lo, K + 1)
    d = len(levels)
    bdag = sp.diags(np.ones(d - 1, dtype=complex), -1, shape=(d, d)).tocsr()
    b = sp.diags(qnum(p, levels[1:]), 1, shape=(d, d)).tocsr()
    return FockModule(p, levels, b, bdag)


def fock_residuals(f: FockModule) -> dict:
    p = f.p
    room = f.room()
    c1 = np.nonzero(room >= 1)[0]
    qn = lambda nu: sp.diags(f.qN(nu))
    out = {}
    nu = 0.6 + 0.3j
    out["q^N b q^-N = q^-1 b"] = _res(qn(nu) @ f.b @ qn(-nu) - p.pow(-nu) * f.b, c1)
    out["q^N b+ q^-N = q b+"] = _res(qn(nu) @ f.bdag @ qn(-nu) - p.pow(nu) * f.bdag, c1)
    out["b+ b = [N]"] = _res(f.bdag @ f.b - sp.diags(qnum(p, f.levels)), c1)
    out["b b+ = [N+1]"] = _res(f.b @ f.bdag - sp.diags(qnum(p, f.levels + 1)), c1)
    return out


def _res(A, cols):
    A = sp.csr_matrix(A)[:, cols]
    return float(np.abs(A.data).max()) if A.nnz else 0.0


# ---------------------------------------------------------------------------
# theta: U_q(b_+) -> Osc_q^{(n-1)}

def theta_image(n: int, gen: str):
    """Oscillator recipe for theta(gen).

    Cartan labels give integer coefficients c with h_i -> sum_a c_a N_a; e-labels give a
    list of (coefficient, b-powers, Cartan exponent) data consumed by _theta_matrix.
    """
    kind, idx = gen[0], int(gen[1:])
    if kind == "f":
        raise BorelViolation(f"theta is defined on the positive Borel subalgebra only; {gen} has no image")
    if n == 2:
        cart = {0: (2,), 1: (-2,)}
        # (scalar, kappa power, [(op, factor)], N exponent per factor, constant q power)
        ev = {0: (1.0, 0, [("bdag", 0)], (0,), 0), 1: (1.0, -1, [("b", 0)], (-1,), 0)}
    elif n == 3:
        cart = {0: (2, 1), 1: (-1, 1), 2: (-1, -2)}
        ev = {0: (1.0, 0, [("bdag", 0)], (0, -1), 0),
              1: (-1.0, 0, [("b", 0), ("bdag", 1)], (-1, 1), 1),
              2: (1.0, -1, [("b", 1)], (0, -1), 0)}
    else:
        raise ValueError("theta is tabulated for n = 2, 3")
    if not 0 <= idx < n:
        raise KeyError(gen)
    return cart[idx] if kind == "h" else ev[idx]


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def _theta_matrices(p: QParams, n: int, factors: Sequence[FockModule]):
    eyes = [sp.identity(f.dim, dtype=complex, format="csr") for f in factors]
    levels = np.array(np.meshgrid(*[f.levels for f in factors], indexing="ij")).reshape(len(factors), -1)
    e = []
    for i in range(n):
        scal, kpow, ops, nexp, qc = theta_image(n, f"e{i}")
        mats = list(eyes)
        for op, a in ops:
            mats[a] = mats[a] @ getattr(factors[a], op)
        M = _kron_all(mats)
        diag = p.pow(np.tensordot(np.array(nexp, dtype=float), levels, axes=1) + qc)
        e.append(sp.csr_matrix(scal * p.kappa ** kpow * (M @ sp.diags(diag))))
    h = np.array([np.tensordot(np.array(theta_image(n, f"h{i}"), dtype=float), levels, axes=1)
                  for i in range(n)], dtype=complex)
    return e, h, levels.T


def osc_index_map(n: int, i: int, barred: bool):
    """Index g with rho_i(e_j) = theta(e_{g(j)})."""
    if barred:
        # theta o tau o sigma^{-i+1}
        return [apply_tau(apply_sigma(j, -i + 1, n), n) for j in range(n)]
    return [apply_sigma(j, -i, n) for j in range(n)]


def build_osc_rep(p: QParams, n: int, i: int, barred: bool = False, grad: Optional[GradationS] = None,
                  xi=None, K: int = 24, windows: Optional[Sequence[tuple]] = None) -> AffineRep:
    """rho_i (or rho-bar_i) = chi o theta_i o Gamma_zeta on n-1 Fock factors.

    rho-bar_i also carries the sign automorphism e_j -> -e_j (see affine.barred_rep).

    `windows` overrides the level range of each factor, e.g. [(-30, 4)] for a lattice window.
    """
    if not 1 <= i <= n:
        raise ValueError(f"oscillator index must be in 1..{n}")
    grad = grad or GradationS.default(n)
    if windows is None:
        windows = [(0, K)] * (n - 1)
    factors = [build_fock(p, hi, lo) for lo, hi in windows]
    e0, h0, coords = _theta_matrices(p, n, factors)
    g = osc_index_map(n, i, barred)
    e = tuple(e0[g[j]] for j in range(n))
    if barred:
        e = tuple(-x for x in e)  # tau is paired with the sign automorphism, as for barred_rep
    h = h0[g]
    rooms = np.array(np.meshgrid(*[f.room() for f in factors], indexing="ij")).reshape(len(factors), -1)
    room = rooms.min(axis=0)
    label = ("rhobar" if barred else "rho") + f"_{i}"
    rep = AffineRep(p, n, e, None, h, grad.s, label=label, room=room, coords=coords,
                    module=tuple(factors), xi=(0,) * n)
    if xi is not None:
        rep = rep.with_shift(xi)
    return rep
