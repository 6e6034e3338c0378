"""Intertwiners of U_q(L(sl_n)) representations: R-matrices and L-operators.

An intertwiner X on aux (x) site solves  Delta^op(a) X = X Delta(a)  for the generators a,
with the aux representation in the first tensor factor and the site at spectral
parameter 1, so X depends on z = zeta_aux / zeta_site.  We solve directly for the
Laurent coefficients of X (stacking the equations degree by degree) and fix the
normalization by the Cartan factor: X(0) = q^K with K = sum_ij B_ij h_i (x) h_j,
B the inverse Cartan matrix of sl_n.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .affine import AffineRep, cartan_matrix_affine, fundamental_weight_matrix
from .core import LaurentOp, QParams, series_exp, series_log


class IntertwinerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# shared helpers

def weight_keys(rep: AffineRep, decimals: int = 7) -> np.ndarray:
    """Hashable weight labels (h_1..h_{n-1} eigenvalues, shift removed)."""
    h = rep.h[1:] - np.array(rep.xi[1:])[:, None]
    r = np.round(np.concatenate([h.real, h.imag]), decimals)
    return r.T


def cartan_exponent(aux: AffineRep, site: AffineRep) -> np.ndarray:
    """K = sum B_ij h_i (x) h_j as a diagonal on aux (x) site (aux index slow)."""
    n = aux.n
    B = fundamental_weight_matrix(n)
    ha, hs = aux.h[1:], site.h[1:]
    # K(x, a) = sum_ij B_ij ha_i(x) hs_j(a)
    return np.einsum("ij,ix,ja->xa", B, ha, hs).reshape(-1)


def cartan_diag_for_site(aux: AffineRep, site: AffineRep, a: int) -> np.ndarray:
    n = aux.n
    B = fundamental_weight_matrix(n)
    return aux.p.pow(np.einsum("ij,ix,j->x", B, aux.h[1:], site.h[1:, a]))


def _null_space(A, rtol: float = 1e-9):
    """Right null space of a (dense or sparse) matrix; returns basis and singular values."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    if A.shape[0] > 2 * A.shape[1]:
        A = sla.qr(A, mode="r", overwrite_a=False, check_finite=False)[0][: A.shape[1]]
    _, sv, vh = np.linalg.svd(A, full_matrices=True)
    full = np.zeros(vh.shape[0])
    full[: len(sv)] = sv
    scale = full.max() if full.size else 1.0
    idx = np.nonzero(full <= rtol * scale)[0]
    return vh[idx].conj().T, full


# ---------------------------------------------------------------------------
# coefficient-space solve (finite or truncated aux, finite site)

@dataclass
class SolveInfo:
    degree: int
    nullity: int
    singular_values: np.ndarray
    core_rank: int = 1
    notes: str = ""


def _equation_terms(aux: AffineRep, site: AffineRep, full: bool):
    """(shift, M, N, sign) with the equation sum sign * z^shift * M X N = 0, per generator."""
    n = aux.n
    Ia = sp.identity(aux.dim, dtype=complex, format="csr")
    Is = sp.identity(site.dim, dtype=complex, format="csr")
    eqs = []
    for i in range(n):
        qa = sp.diags(aux.qh(np.eye(n)[i], -1.0))
        qs = sp.diags(site.qh(np.eye(n)[i], -1.0))
        si = aux.s[i]
        eqs.append([
            (0, sp.kron(Ia, site.e[i]), None, 1.0),
            (si, sp.kron(aux.e[i], qs), None, 1.0),
            (si, None, sp.kron(aux.e[i], Is), -1.0),
            (0, None, sp.kron(qa, site.e[i]), -1.0),
        ])
        if full:
            qa_p = sp.diags(aux.qh(np.eye(n)[i], 1.0))
            qs_p = sp.diags(site.qh(np.eye(n)[i], 1.0))
            eqs.append([
                (si, sp.kron(qa_p, site.f[i]), None, 1.0),
                (0, sp.kron(aux.f[i], Is), None, 1.0),
                (0, None, sp.kron(aux.f[i], qs_p), -1.0),
                (si, None, sp.kron(Ia, site.f[i]), -1.0),
            ])
    return eqs


def _pattern(aux: AffineRep, site: AffineRep):
    """Weight-conserving (row, col) positions of aux (x) site."""
    wa, ws = weight_keys(aux), weight_keys(site)
    tot = (wa[:, None, :] + ws[None, :, :]).reshape(aux.dim * site.dim, -1)
    tot = np.round(tot, 6)
    _, lab = np.unique(tot, axis=0, return_inverse=True)
    lab = lab.reshape(-1)
    rows, cols = [], []
    for g in np.unique(lab):
        idx = np.nonzero(lab == g)[0]
        rr, cc = np.meshgrid(idx, idx, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
    return np.concatenate(rows), np.concatenate(cols)


def _assemble(aux, site, D, full, margin):
    dim = aux.dim * site.dim
    pr, pc = _pattern(aux, site)
    npat = len(pr)
    safe_state = np.repeat(aux.room >= margin, site.dim)
    eqs = _equation_terms(aux, site, full)
    blocks = []
    for terms in eqs:
        maxshift = max(t[0] for t in terms)
        for delta in range(D + maxshift + 1):
            row_parts = []
            for shift, M, N, sign in terms:
                d = delta - shift
                if not 0 <= d <= D:
                    continue
                # vec(M X N) restricted to pattern unknowns, output in (r, c) coordinates
                if M is not None:
                    Mc = sp.csc_matrix(M)[:, pr]  # column k: M[:, r_k]
                    coo = Mc.tocoo()
                    out_r, out_c = coo.row, pc[coo.col]
                    vals, unk = coo.data, coo.col
                else:
                    Nr = sp.csr_matrix(N)[pc, :]  # row k: N[c_k, :]
                    coo = Nr.tocoo()
                    out_r, out_c = pr[coo.row], coo.col
                    vals, unk = coo.data, coo.row
                keep = safe_state[out_c]
                row_parts.append((out_r[keep] * dim + out_c[keep], unk[keep] + d * npat, sign * vals[keep]))
            if row_parts:
                blocks.append(row_parts)
    # map output keys to compact rows per block
    rows_all, cols_all, vals_all = [], [], []
    offset = 0
    for parts in blocks:
        keys = np.concatenate([p[0] for p in parts])
        if keys.size == 0:
            continue
        uk, inv = np.unique(keys, return_inverse=True)
        rows_all.append(inv + offset)
        cols_all.append(np.concatenate([p[1] for p in parts]))
        vals_all.append(np.concatenate([p[2] for p in parts]))
        offset += len(uk)
    A = sp.csr_matrix((np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
                      shape=(offset, (D + 1) * npat))
    return A, pr, pc


def solve_intertwiner(aux: AffineRep, site: AffineRep, full: Optional[bool] = None,
                      max_degree: int = 12, margin: int = 3, rtol: float = 1e-9) -> Tuple[LaurentOp, SolveInfo]:
    """Minimal-degree polynomial solution X(z) on aux (x) site, normalised by X(0) = q^K."""
    if site.f is None or not site.finite():
        raise IntertwinerError("the site representation must be a finite-dimensional evaluation representation")
    if full is None:
        full = aux.f is not None
    if full and aux.f is None:
        raise IntertwinerError("full intertwining needs the f-generators of the aux representation")
    dim = aux.dim * site.dim
    Kd = aux.p.pow(cartan_exponent(aux, site))
    core = np.repeat(aux.room >= margin + 2, site.dim)
    for D in range(0, max_degree + 1):
        A, pr, pc = _assemble(aux, site, D, full, margin)
        N, sv = _null_space(A, rtol)
        if N.shape[1] == 0:
            continue
        # restrict to core entries: the truncation edge leaves boundary entries free
        npat = len(pr)
        mask = np.tile(core[pc], D + 1)
        Nc = N[mask]
        U, s2, _ = np.linalg.svd(Nc, full_matrices=False)
        rank = int(np.sum(s2 > 1e-6))  # null vectors have unit norm
        if rank == 0:
            continue  # only edge artefacts of the truncation
        if rank != 1:
            raise IntertwinerError(f"intertwiner not unique: core rank {rank} at degree {D}")
        vec = N @ (np.linalg.pinv(Nc) @ U[:, 0]) if N.shape[1] > 1 else N[:, 0]
        coeffs = np.zeros((D + 1, dim, dim), dtype=complex)
        for d in range(D + 1):
            coeffs[d][pr, pc] = vec[d * npat:(d + 1) * npat]
        # normalise with the Cartan factor on the anchor (aux hw, site 0)
        X0 = coeffs[0][0, 0]
        if abs(X0) < 1e-12:
            raise IntertwinerError("anchor entry vanishes")
        coeffs *= Kd[0] / X0
        info = SolveInfo(D, N.shape[1], sv, rank)
        return LaurentOp(coeffs, 0), info
    raise IntertwinerError(f"no intertwiner up to degree {max_degree}")


def solve_R(rep1: AffineRep, rep2: AffineRep, **kw) -> LaurentOp:
    """R(z), z = zeta_1/zeta_2, intertwining the full algebra on rep1 (x) rep2."""
    if rep1.f is None or rep2.f is None:
        raise IntertwinerError("solve_R needs two full representations")
    return solve_intertwiner(rep1, rep2, full=True, **kw)[0]


def solve_L(aux: AffineRep, site: AffineRep, **kw) -> LaurentOp:
    """L(z) for a positive-Borel aux representation; only e_i and Cartan intertwining is imposed."""
    return solve_intertwiner(aux, site, full=False, **kw)[0]


def solve_at(aux: AffineRep, site: AffineRep, z: complex, full: bool = False, margin: int = 3) -> np.ndarray:
    """Pointwise solution X at a fixed ratio z (anchor-aligned to 1), used as a held-out check."""
    dim = aux.dim * site.dim
    pr, pc = _pattern(aux, site)
    eqs = _equation_terms(aux, site, full)
    safe_state = np.repeat(aux.room >= margin, site.dim)
    rows = []
    for terms in eqs:
        tot = None
        for shift, M, N, sign in terms:
            op = (sign * z ** shift) * (_left(M, pr, pc) if M is not None else _right(N, pr, pc))
            tot = op if tot is None else tot + op
        keep = np.nonzero(np.repeat(True, dim * dim).reshape(dim, dim)[:, safe_state].ravel())[0]
        rows.append(_restrict_cols(tot, dim, safe_state))
    A = sp.vstack(rows)
    N, _ = _null_space(A)
    if N.shape[1] < 1:
        raise IntertwinerError("no pointwise solution")
    X = np.zeros((dim, dim), dtype=complex)
    X[pr, pc] = N[:, 0]
    return X / X[0, 0]


def _left(M, pr, pc):
    dim = M.shape[0]
    coo = sp.csc_matrix(M)[:, pr].tocoo()
    return sp.csr_matrix((coo.data, (coo.row * dim + pc[coo.col], coo.col)), shape=(dim * dim, len(pr)))


def _right(N, pr, pc):
    dim = N.shape[0]
    coo = sp.csr_matrix(N)[pc, :].tocoo()
    return sp.csr_matrix((coo.data, (pr[coo.row] * dim + coo.col, coo.row)), shape=(dim * dim, len(pr)))


def _restrict_cols(A, dim, safe_state):
    keyc = np.tile(np.arange(dim), dim)
    rows = np.nonzero(safe_state[keyc])[0]
    return A[rows]


def intertwining_residual(X: LaurentOp, aux: AffineRep, site: AffineRep, zs: Sequence[complex],
                          full: Optional[bool] = None, margin: int = 3) -> float:
    """max_a || Delta^op(a) X - X Delta(a) || / ||X|| on truncation-safe columns."""
    from .core import op_eval

    if full is None:
        full = aux.f is not None and site.f is not None
    eqs = _equation_terms(aux, site, full)
    safe = np.nonzero(np.repeat(aux.room >= margin, site.dim))[0]
    worst = 0.0
    for z in zs:
        Xz = sp.csr_matrix(op_eval(X, z))
        nrm = max(abs(Xz).max(), 1e-300)
        for terms in eqs:
            tot = None
            for shift, M, N, sign in terms:
                t = (M @ Xz) if M is not None else (Xz @ N)
                t = (sign * z ** shift) * t
                tot = t if tot is None else tot + t
            r = sp.csr_matrix(tot)[:, safe]
            if r.nnz:
                worst = max(worst, float(abs(r).max()) / nrm)
    return worst


# ---------------------------------------------------------------------------
# operators in block form: X = sum_ab X_ab (x) E_ab, X_ab = sum_d z^d X_ab[d]

@dataclass
class BlockOp:
    """Aux-operator-valued matrix over the site: blocks[(a, b)] = {degree: sparse aux matrix}."""

    aux_dim: int
    site_dim: int
    blocks: Dict[Tuple[int, int], Dict[int, sp.csr_matrix]]

    @property
    def max_degree(self) -> int:
        return max((d for blk in self.blocks.values() for d in blk), default=0)

    def to_laurent(self) -> LaurentOp:
        D = self.max_degree
        da, ds = self.aux_dim, self.site_dim
        c = np.zeros((D + 1, da * ds, da * ds), dtype=complex)
        for (a, b), blk in self.blocks.items():
            for d, M in blk.items():
                c[d][a::ds, b::ds] += M.toarray()
        return LaurentOp(c, 0)

    @classmethod
    def from_laurent(cls, X: LaurentOp, aux_dim: int, site_dim: int, tol: float = 0.0) -> "BlockOp":
        blocks = {}
        for a in range(site_dim):
            for b in range(site_dim):
                blk = {}
                for d, C in X.terms():
                    M = C[a::site_dim, b::site_dim]
                    if np.abs(M).max() > tol:
                        blk[d] = sp.csr_matrix(M)
                if blk:
                    blocks[(a, b)] = blk
        return cls(aux_dim, site_dim, blocks)

    def at(self, z) -> sp.csr_matrix:
        da, ds = self.aux_dim, self.site_dim
        out = sp.csr_matrix((da * ds, da * ds), dtype=complex)
        for (a, b), blk in self.blocks.items():
            M = sum(z ** d * X for d, X in blk.items())
            E = sp.csr_matrix(([1.0], ([a], [b])), shape=(ds, ds))
            out = out + sp.kron(M, E, format="csr")
        return out


# ---------------------------------------------------------------------------
# word expansion: X_ab = sum_{w, m} c * rho(w) q^{m.omega(h)} q^{K_b}
# with omega_i(h) = sum_k B_ik h_k the fundamental coweight coordinates


def _cartan_monomial(p: QParams, m, h0: np.ndarray) -> np.ndarray:
    n = h0.shape[0]
    B = fundamental_weight_matrix(n)
    return p.pow(np.tensordot(np.asarray(m, dtype=float) @ B, h0[1:], axes=1))

Word = Tuple[int, ...]


def enumerate_words(n: int, s: Sequence[int], max_degree: int) -> List[Word]:
    out = [()]
    frontier = [()]
    while frontier:
        nxt = []
        for w in frontier:
            for i in range(n):
                w2 = w + (i,)
                if sum(s[j] for j in w2) <= max_degree:
                    nxt.append(w2)
        out.extend(nxt)
        frontier = nxt
    return out


def word_weight(n: int, w: Word) -> np.ndarray:
    A = cartan_matrix_affine(n)
    v = np.zeros(n)
    for i in w:
        v += A[:, i]
    return v


def _word_matrix(rep: AffineRep, w: Word, cache: dict) -> sp.csr_matrix:
    if w in cache:
        return cache[w]
    if not w:
        M = sp.identity(rep.dim, dtype=complex, format="csr")
    else:
        M = sp.csr_matrix(_word_matrix(rep, w[:-1], cache) @ rep.e[w[-1]])
    cache[w] = M
    return M


@dataclass
class WordExpansion:
    """Closed-form L-operator (aux family x fundamental site) fitted once on a small truncation."""

    n: int
    s: tuple
    site_label: str
    terms: List[Tuple[int, int, int, Word, tuple, complex]]  # (a, b, degree, word, m, coeff)
    info: dict = field(default_factory=dict)
    href: Optional[np.ndarray] = None  # Cartan values the monomials are measured from

    def evaluate(self, rep: AffineRep, site: AffineRep) -> BlockOp:
        p = rep.p
        cache: dict = {}
        h0 = rep.h - np.array(rep.xi)[:, None]
        if self.href is not None:
            h0 = h0 - self.href[:, None]
        blocks: Dict[Tuple[int, int], Dict[int, sp.csr_matrix]] = {}
        kdiag = {b: cartan_diag_for_site(rep, site, b) for b in range(site.dim)}
        grouped: Dict[tuple, Dict[tuple, complex]] = {}
        for a, b, d, w, m, c in self.terms:
            grouped.setdefault((a, b, d, w), {})[m] = c
        for (a, b, d, w), cm in grouped.items():
            diag = np.zeros(rep.dim, dtype=complex)
            for m, c in cm.items():
                diag += c * _cartan_monomial(p, m, h0)
            M = _word_matrix(rep, w, cache) @ sp.diags(diag * kdiag[b])
            blk = blocks.setdefault((a, b), {})
            blk[d] = sp.csr_matrix(blk[d] + M) if d in blk else sp.csr_matrix(M)
        return BlockOp(rep.dim, site.dim, blocks)


def fit_word_expansion(rep: AffineRep, site: AffineRep, box: int = 1, max_degree: Optional[int] = None,
                       margin: Optional[int] = None, rtol: float = 1e-9) -> WordExpansion:
    """Fit coefficients c such that X = sum c rho(w) q^{m.h} q^{K} intertwines e_i and Cartan.

    The fit is done on the (truncated) rep; columns closer than `margin` to a truncation
    edge are excluded from the equations.  Normalisation: X(0) = q^K.
    """
    n, p = rep.n, rep.p
    s = rep.s
    D = sum(s) if max_degree is None else max_degree
    maxlen = D // min(s)
    margin = maxlen + 1 if margin is None else margin
    words = enumerate_words(n, s, D)
    wts = {w: word_weight(n, w) for w in words}
    hs = site.h  # site eigenvalues (n, ds)
    ms = list(itertools.product(range(-box, box + 1), repeat=n - 1))
    h0 = rep.h - np.array(rep.xi)[:, None]
    # measure monomials from the top state so that large weights do not unbalance the columns
    href = h0[:, 0].copy()
    h0 = h0 - href[:, None]
    cache: dict = {}
    kdiag = {b: cartan_diag_for_site(rep, site, b) for b in range(site.dim)}
    cart = {m: _cartan_monomial(p, m, h0) for m in ms}
    unknowns = []
    for a in range(site.dim):
        for b in range(site.dim):
            target = np.real_if_close(hs[:, b] - hs[:, a])
            for w in words:
                if not np.allclose(wts[w], target, atol=1e-9):
                    continue
                d = sum(s[i] for i in w)
                if d == 0:
                    if a != b:
                        continue
                    unknowns.append((a, b, 0, w, (0,) * (n - 1)))  # normalised below
                    continue
                for m in ms:
                    unknowns.append((a, b, d, w, m))
    # columns of the equation system
    safe = rep.room >= margin
    safe_idx = np.nonzero(safe)[0]
    ds, da = site.dim, rep.dim
    qmh = [sp.diags(rep.qh(np.eye(n)[i], -1.0)) for i in range(n)]
    qsite = [site.qh(np.eye(n)[i], -1.0) for i in range(n)]
    se = [site.e[i].toarray() for i in range(n)]
    cols, rhs_keys = [], {}
    col_data = []
    for (a, b, d, w, m) in unknowns:
        O = _word_matrix(rep, w, cache) @ sp.diags(cart[m] * kdiag[b])
        O = sp.csr_matrix(O)
        contrib = []  # (gen, a', b', degree, sparse matrix)
        for i in range(n):
            for a2 in range(ds):
                if se[i][a2, a] != 0:
                    contrib.append((i, a2, b, d, se[i][a2, a] * O))
            contrib.append((i, a, b, d + s[i], qsite[i][a] * (rep.e[i] @ O)))
            contrib.append((i, a, b, d + s[i], -(O @ rep.e[i])))
            for b2 in range(ds):
                if se[i][b, b2] != 0:
                    contrib.append((i, a, b2, d, -se[i][b, b2] * (O @ qmh[i])))
        col_data.append(contrib)
    # row keys
    key_index: Dict[tuple, int] = {}
    R, C, V = [], [], []
    for j, contrib in enumerate(col_data):
        for (i, a2, b2, dd, M) in contrib:
            M = sp.csr_matrix(M)[:, safe_idx].tocoo()
            if M.nnz == 0:
                continue
            blk = (i, a2, b2, dd)
            base = key_index.setdefault(blk, len(key_index))
            R.append(base * (da * da) + M.row * da + safe_idx[M.col])
            C.append(np.full(M.nnz, j))
            V.append(M.data)
    R = np.concatenate(R)
    uk, rows = np.unique(R, return_inverse=True)
    A = sp.csr_matrix((np.concatenate(V), (rows, np.concatenate(C))), shape=(len(uk), len(unknowns)))
    # normalisation: coefficients of the empty word are fixed to 1
    fixed = [j for j, u in enumerate(unknowns) if u[2] == 0]
    free = [j for j, u in enumerate(unknowns) if u[2] != 0]
    rhs = -np.asarray(A[:, fixed].sum(axis=1)).ravel()
    Af = A[:, free]
    # row-normalise and solve in the least-squares sense through the Gram matrix plus refinement
    coef_free, res, nullity = _lstsq_sparse(Af, rhs, rtol)
    coef = np.zeros(len(unknowns), dtype=complex)
    coef[fixed] = 1.0
    coef[free] = coef_free
    resid = np.abs(A @ coef).max() / max(1.0, np.abs(A).max())
    terms = [(a, b, d, w, m, complex(c)) for (a, b, d, w, m), c in zip(unknowns, coef) if abs(c) > 1e-13]
    info = {"unknowns": len(unknowns), "equations": A.shape[0], "residual": float(resid),
            "nullity": int(nullity), "box": box, "fit_rep": rep.label, "fit_dim": rep.dim}
    return WordExpansion(n, tuple(s), site.label, terms, info, href)


def _lstsq_sparse(A, b, rtol):
    """Minimum-norm least squares through a dense QR of the (tall) system."""
    Ad = A.toarray()
    # rounding residue of vanishing q-numbers must not be promoted to a constraint
    Ad[np.abs(Ad) < 1e-13 * np.abs(Ad).max()] = 0
    scale = np.abs(Ad).max(axis=1)
    scale[scale == 0] = 1
    Ad /= scale[:, None]
    b = b / scale
    cscale = np.abs(Ad).max(axis=0)
    cscale[cscale == 0] = 1
    Ad /= cscale[None, :]
    if Ad.shape[0] > Ad.shape[1]:
        Q, Rm = np.linalg.qr(Ad)
        Ad, b = Rm, Q.conj().T @ b
    U, sv, Vh = np.linalg.svd(Ad, full_matrices=False)
    keep = sv > rtol * sv.max()
    x = Vh[keep].conj().T @ ((U[:, keep].conj().T @ b) / sv[keep])
    return x / cscale, None, int(np.sum(~keep))


# ---------------------------------------------------------------------------
# normalisation through the quantum determinant

def singlet_ratios(p: QParams, n: int, s_total: int) -> np.ndarray:
    """Site parameters zeta_j (zeta_1 = 1) for which V^{(x) n} has a one-dimensional
    subspace annihilated by all f_i with trivial Cartan action."""
    return np.array([p.pow(2.0 * j / s_total) for j in range(n)])


def singlet_vector(p: QParams, site: AffineRep, zetas: Sequence[complex]) -> np.ndarray:
    """The B_- singlet in site^{(x) n}; raises if it does not exist at these parameters."""
    n = site.n
    ds = site.dim
    dims = [ds] * len(zetas)
    tot = np.prod(dims)
    I = sp.identity(ds, dtype=complex, format="csr")
    eqs = []
    for i in range(n):
        qh = sp.diags(site.qh(np.eye(n)[i]))
        # Delta^{(N)}(f_i) = sum_k 1 (x) .. (x) f_i (x) q^{h_i} (x) .. (x) q^{h_i}
        F = sp.csr_matrix((tot, tot), dtype=complex)
        for k in range(len(zetas)):
            mats = [I] * k + [site.f_at(i, zetas[k])] + [qh] * (len(zetas) - k - 1)
            M = mats[0]
            for m in mats[1:]:
                M = sp.kron(M, m, format="csr")
            F = F + M
        eqs.append(F)
    # weight zero subspace
    wk = weight_keys(site)
    w = np.zeros((tot, wk.shape[1]))
    for idx, multi in enumerate(itertools.product(range(ds), repeat=len(zetas))):
        w[idx] = sum(wk[j] for j in multi)
    zero = np.nonzero(np.all(np.abs(w) < 1e-9, axis=1))[0]
    A = sp.vstack(eqs).tocsc()[:, zero]
    N, sv = _null_space(A, 1e-10)
    if N.shape[1] != 1:
        raise IntertwinerError(f"singlet space has dimension {N.shape[1]} at these parameters")
    v = np.zeros(tot, dtype=complex)
    v[zero] = N[:, 0]
    return v


def normalisation_series(ops: Sequence[BlockOp], zetas: Sequence[complex], singlet: np.ndarray,
                         order: int, s_total: int, states: Sequence[int] = (0,)) -> Tuple[np.ndarray, dict]:
    """Coefficients F_0..F_order of the scalar F with prod_j F(z/zeta_j) Y(z) = 1.

    ops[j] is the block form of the normalised intertwiner at site j (site spectral
    parameter 1); Y(z) is read off on aux states `states` against the singlet.
    Returns F and diagnostics (the spread of Y over the probe states checks scalarity).
    """
    ds = ops[0].site_dim
    nsite = len(zetas)
    # Y(z) = <x, w| R_n(z/zeta_n) ... R_1(z/zeta_1) |x, w> / <w|w> as a power series
    Ys = []
    for x in states:
        Ys.append(_singlet_series(ops, zetas, singlet, x, order))
    Ys = np.array(Ys)
    Y = Ys[0]
    spread = float(np.abs(Ys - Y).max()) if len(Ys) > 1 else 0.0
    L = series_log(Y)
    g = np.zeros(order + 1, dtype=complex)
    for m in range(1, order + 1):
        den = sum(complex(z) ** (-m) for z in zetas)
        g[m] = -L[m] / den
    F = series_exp(g)
    return F, {"Y0": complex(Y[0]), "scalar_spread": spread}


def _singlet_series(ops, zetas, w, x, order):
    """Power series of <x (x) w| prod_j R_j |x (x) w> for aux basis state x."""
    ds = ops[0].site_dim
    nsite = len(zetas)
    shape = [ds] * nsite
    wt = w.reshape(shape)
    # state: dict aux_index -> tensor over sites, as power series list
    # represent the vector as array (order+1, aux_dim_sparse...) using dict of aux states
    vec = {x: [np.zeros(shape, dtype=complex) for _ in range(order + 1)]}
    vec[x][0] = wt.copy()
    for j in range(nsite):
        op = ops[j]
        zj = complex(zetas[j])
        new: dict = {}
        for (a, b), blk in op.blocks.items():
            for d, M in blk.items():
                if d > order:
                    continue
                fac = zj ** (-d)
                Mc = M.tocsc()
                for y, series in vec.items():
                    col = Mc.getcol(y)
                    if col.nnz == 0:
                        continue
                    for ridx, val in zip(col.indices, col.data):
                        tgt = new.setdefault(int(ridx), [np.zeros(shape, dtype=complex) for _ in range(order + 1)])
                        for k in range(order + 1 - d):
                            src = np.take(series[k], b, axis=j)
                            if not src.any():
                                continue
                            sl = [slice(None)] * nsite
                            sl[j] = a
                            tgt[k + d][tuple(sl)] += fac * val * src
        vec = new
    res = vec.get(x)
    if res is None:
        raise IntertwinerError("aux probe state left its weight space")
    norm = np.vdot(wt, wt)
    return np.array([np.vdot(wt, t) / norm for t in res])


def fit_family(make: Callable[[int], AffineRep], site: AffineRep, K_fit: Optional[int] = None,
               boxes: Sequence[int] = (1, 2, 3), tol: float = 1e-9) -> WordExpansion:
    """Fit a word expansion for the truncation family make(K), checked on a larger truncation.

    The Cartan box is widened until the fitted operator intertwines on make(K_fit + 3).
    """
    n = site.n
    K_fit = K_fit if K_fit is not None else (10 if n == 2 else 12)
    last = None
    for box in boxes:
        W = fit_word_expansion(make(K_fit), site, box=box)
        big = make(K_fit + 3)
        X = W.evaluate(big, site).to_laurent()
        maxlen = sum(big.s) // min(big.s)
        res = intertwining_residual(X, big, site, [0.45 + 0.2j, 1.3j], full=False, margin=maxlen + 1)
        W.info["check_residual"] = res
        if res < tol and W.info["residual"] < tol:
            return W
        last = W
    raise IntertwinerError(f"word expansion did not converge (last check residual {last.info['check_residual']:.2e})")
