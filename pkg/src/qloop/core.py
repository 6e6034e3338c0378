"""q-number arithmetic and matrix-valued Laurent polynomials in the spectral parameter."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PRUNE_REL = 1e-14


class QError(ValueError):
    """Invalid deformation parameter."""


@dataclass(frozen=True)
class QParams:
    hbar: complex
    root_order: int = 64
    root_eps: float = 1e-8

    def __post_init__(self):
        hb = complex(self.hbar)
        object.__setattr__(self, "hbar", hb)
        if hb == 0:
            raise QError("hbar = 0 gives q = 1")
        q = np.exp(hb)
        for k in range(1, self.root_order + 1):
            if abs(q**k - 1) <= self.root_eps:
                raise QError(f"q = exp({hb}) is within {self.root_eps} of a root of unity (q^{k} = 1)")

    @property
    def q(self) -> complex:
        return complex(np.exp(self.hbar))

    @property
    def kappa(self) -> complex:
        return complex(np.exp(self.hbar) - np.exp(-self.hbar))

    def pow(self, x):
        """q**x as exp(hbar*x); works elementwise on arrays."""
        return np.exp(self.hbar * np.asarray(x, dtype=complex)) if np.ndim(x) else complex(np.exp(self.hbar * x))

    def num(self, x):
        return qnum(self, x)


def qpow(p: QParams, x):
    return p.pow(x)


def qnum(p: QParams, nu):
    """[nu]_q = (q^nu - q^-nu)/(q - q^-1)."""
    nu = np.asarray(nu, dtype=complex)
    val = (np.exp(p.hbar * nu) - np.exp(-p.hbar * nu)) / p.kappa
    return complex(val) if val.ndim == 0 else val


def qfactorial(p: QParams, m: int) -> complex:
    out = 1.0 + 0j
    for j in range(1, m + 1):
        out *= qnum(p, j)
    return out


def qbinom(p: QParams, m: int, k: int) -> complex:
    if k < 0 or m < 0 or k > m:
        raise ValueError(f"q-binomial needs 0 <= k <= m, got m={m}, k={k}")
    k = min(k, m - k)
    out = 1.0 + 0j
    for j in range(1, k + 1):
        out *= qnum(p, m - k + j) / qnum(p, j)
    return out


# ---------------------------------------------------------------------------
# Laurent polynomials

def _prune_window(c: np.ndarray, dmin: int, rel: float):
    """Drop negligible coefficients and trim the window; c has the exponent on axis 0."""
    if c.shape[0] == 0:
        return c, dmin
    mags = np.abs(c).reshape(c.shape[0], -1).max(axis=1)
    top = mags.max()
    if top == 0:
        return c[:0], 0
    c = c.copy()
    c[np.abs(c) < rel * top] = 0
    mags = np.abs(c).reshape(c.shape[0], -1).max(axis=1)
    nz = np.nonzero(mags)[0]
    return c[nz[0]:nz[-1] + 1], dmin + int(nz[0])


class LaurentOp:
    """dim x dim matrix whose entries are Laurent polynomials in zeta.

    Stored as coeffs[k] = matrix coefficient of zeta**(dmin + k).  ``order`` marks
    a truncated power series: coefficients above it are unknown and discarded.
    """

    __slots__ = ("coeffs", "dmin", "order")

    def __init__(self, coeffs, dmin: int = 0, order: Optional[int] = None, prune: float = PRUNE_REL):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"LaurentOp coefficients must have shape (deg, dim, dim), got {c.shape}")
        dmin = int(dmin)
        if order is not None:
            keep = max(0, min(c.shape[0], order - dmin + 1))
            c = c[:keep]
        if prune:
            c, dmin = _prune_window(c, dmin, prune)
        self.coeffs = c
        self.dmin = dmin if c.shape[0] else 0
        self.order = order
        self.coeffs.setflags(write=False)

    # construction helpers
    @classmethod
    def const(cls, mat, order=None):
        return cls(np.asarray(mat, dtype=complex)[None], 0, order)

    @classmethod
    def identity(cls, dim: int, order=None):
        return cls.const(np.eye(dim), order)

    @classmethod
    def zeros(cls, dim: int, order=None):
        return cls(np.zeros((0, dim, dim)), 0, order)

    @classmethod
    def from_dict(cls, terms: dict, dim: int, order=None):
        if not terms:
            return cls.zeros(dim, order)
        lo, hi = min(terms), max(terms)
        c = np.zeros((hi - lo + 1, dim, dim), dtype=complex)
        for k, m in terms.items():
            c[k - lo] += m
        return cls(c, lo, order)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def dmax(self) -> int:
        return self.dmin + self.coeffs.shape[0] - 1

    def is_zero(self) -> bool:
        return self.coeffs.shape[0] == 0

    def coeff(self, k: int) -> np.ndarray:
        j = k - self.dmin
        if 0 <= j < self.coeffs.shape[0]:
            return self.coeffs[j]
        return np.zeros((self.dim, self.dim), dtype=complex)

    def entry(self, i: int, j: int) -> "LaurentPoly":
        return LaurentPoly(self.coeffs[:, i, j], self.dmin, self.order)

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense coefficient block for exponents lo..hi."""
        out = np.zeros((hi - lo + 1, self.dim, self.dim), dtype=complex)
        for k in range(max(lo, self.dmin), min(hi, self.dmax) + 1):
            out[k - lo] = self.coeffs[k - self.dmin]
        return out

    def terms(self):
        for j in range(self.coeffs.shape[0]):
            yield self.dmin + j, self.coeffs[j]

    def norm(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def __repr__(self):
        o = "" if self.order is None else f", order={self.order}"
        return f"LaurentOp(dim={self.dim}, window=[{self.dmin}, {self.dmax}]{o})"

    # arithmetic
    def __add__(self, other):
        return op_add(self, other)

    def __sub__(self, other):
        return op_add(self, op_scale(other, -1.0))

    def __neg__(self):
        return op_scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, LaurentOp):
            return op_mul(self, other)
        return op_scale(self, other)

    def __rmul__(self, c):
        return op_scale(self, c)

    def __matmul__(self, other):
        return op_mul(self, other)


def _min_order(*orders):
    vals = [o for o in orders if o is not None]
    return min(vals) if vals else None


def _check_dims(a: LaurentOp, b: LaurentOp):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def op_add(a: LaurentOp, b: LaurentOp) -> LaurentOp:
    _check_dims(a, b)
    order = _min_order(a.order, b.order)
    if a.is_zero():
        return LaurentOp(b.coeffs, b.dmin, order)
    if b.is_zero():
        return LaurentOp(a.coeffs, a.dmin, order)
    lo, hi = min(a.dmin, b.dmin), max(a.dmax, b.dmax)
    return LaurentOp(a.window(lo, hi) + b.window(lo, hi), lo, order)


def op_scale(a: LaurentOp, c) -> LaurentOp:
    if isinstance(c, LaurentPoly):
        return op_mul(a, c.as_op(a.dim))
    return LaurentOp(a.coeffs * complex(c), a.dmin, a.order)


def op_mul(a: LaurentOp, b: LaurentOp) -> LaurentOp:
    _check_dims(a, b)
    if a.is_zero() or b.is_zero():
        return LaurentOp.zeros(a.dim, _product_order(a, b))
    order = _product_order(a, b)
    na, nb = a.coeffs.shape[0], b.coeffs.shape[0]
    out = np.zeros((na + nb - 1, a.dim, a.dim), dtype=complex)
    for i in range(na):
        out[i:i + nb] += np.matmul(a.coeffs[i][None], b.coeffs)
    return LaurentOp(out, a.dmin + b.dmin, order)


def _product_order(a: LaurentOp, b: LaurentOp):
    # a truncated series known through order o times something starting at dmin
    cand = []
    if a.order is not None:
        cand.append(a.order + (b.dmin if not b.is_zero() else 0))
    if b.order is not None:
        cand.append(b.order + (a.dmin if not a.is_zero() else 0))
    return min(cand) if cand else None


def op_shift(a: LaurentOp, c: complex) -> LaurentOp:
    """zeta -> c*zeta."""
    c = complex(c)
    if c == 0:
        raise ValueError("shift factor must be nonzero")
    if c == 1:
        return a
    ks = np.arange(a.dmin, a.dmin + a.coeffs.shape[0])
    return LaurentOp(a.coeffs * (c ** ks)[:, None, None], a.dmin, a.order, prune=0)


def op_eval(a: LaurentOp, zeta: complex) -> np.ndarray:
    if zeta == 0:
        raise ValueError("evaluation point must be nonzero")
    if a.is_zero():
        return np.zeros((a.dim, a.dim), dtype=complex)
    ks = np.arange(a.dmin, a.dmin + a.coeffs.shape[0])
    return np.tensordot(complex(zeta) ** ks, a.coeffs, axes=1)


def op_kron(a: LaurentOp, b: LaurentOp) -> LaurentOp:
    """Tensor product of two matrix Laurent polynomials."""
    order = _product_order(a, b)
    if a.is_zero() or b.is_zero():
        return LaurentOp.zeros(a.dim * b.dim, order)
    na, nb = a.coeffs.shape[0], b.coeffs.shape[0]
    out = np.zeros((na + nb - 1, a.dim * b.dim, a.dim * b.dim), dtype=complex)
    for i in range(na):
        for j in range(nb):
            out[i + j] += np.kron(a.coeffs[i], b.coeffs[j])
    return LaurentOp(out, a.dmin + b.dmin, order)


def op_commutator(a: LaurentOp, b: LaurentOp) -> LaurentOp:
    return op_mul(a, b) - op_mul(b, a)


def op_truncate(a: LaurentOp, order: int) -> LaurentOp:
    return LaurentOp(a.coeffs, a.dmin, _min_order(a.order, order))


def op_distance(a: LaurentOp, b: LaurentOp) -> float:
    """Max coefficient-wise difference over the common known window."""
    d = a - b
    return d.norm()


@dataclass(frozen=True)
class LaurentPoly:
    """Scalar Laurent polynomial; a thin 1x1 view used for entries and scalar factors."""

    coeffs: np.ndarray
    dmin: int = 0
    order: Optional[int] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        op = LaurentOp(c[:, None, None], self.dmin, self.order)
        object.__setattr__(self, "coeffs", op.coeffs[:, 0, 0])
        object.__setattr__(self, "dmin", op.dmin)

    @classmethod
    def from_dict(cls, terms: dict, order=None):
        if not terms:
            return cls(np.zeros(0), 0, order)
        lo, hi = min(terms), max(terms)
        c = np.zeros(hi - lo + 1, dtype=complex)
        for k, v in terms.items():
            c[k - lo] += v
        return cls(c, lo, order)

    @property
    def dmax(self) -> int:
        return self.dmin + len(self.coeffs) - 1

    def as_dict(self) -> dict:
        return {self.dmin + j: complex(v) for j, v in enumerate(self.coeffs) if v != 0}

    def as_op(self, dim: int) -> LaurentOp:
        return LaurentOp(self.coeffs[:, None, None] * np.eye(dim)[None], self.dmin, self.order, prune=0)

    def __call__(self, zeta):
        ks = np.arange(self.dmin, self.dmin + len(self.coeffs))
        return complex(np.sum(self.coeffs * complex(zeta) ** ks))

    def shift(self, c):
        return LaurentPoly(op_shift(self.as_op(1), c).coeffs[:, 0, 0], self.dmin, self.order)

    def _op(self):
        return LaurentOp(self.coeffs[:, None, None], self.dmin, self.order, prune=0)

    def __mul__(self, other):
        if isinstance(other, LaurentPoly):
            r = op_mul(self._op(), other._op())
            return LaurentPoly(r.coeffs[:, 0, 0], r.dmin, r.order)
        return LaurentPoly(self.coeffs * complex(other), self.dmin, self.order)

    __rmul__ = __mul__

    def __add__(self, other):
        r = op_add(self._op(), other._op())
        return LaurentPoly(r.coeffs[:, 0, 0], r.dmin, r.order)

    def __sub__(self, other):
        return self + other * (-1.0)


# ---------------------------------------------------------------------------
# power series helpers (truncated, starting at zeta^0)

def series_log(y: np.ndarray) -> np.ndarray:
    """log of a power series with y[0] != 0, principal branch for the constant term."""
    y = np.asarray(y, dtype=complex)
    m = len(y)
    out = np.zeros(m, dtype=complex)
    out[0] = np.log(y[0])
    for k in range(1, m):
        acc = k * y[k]
        for j in range(1, k):
            acc -= j * out[j] * y[k - j]
        out[k] = acc / (k * y[0])
    return out


def series_exp(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    m = len(f)
    out = np.zeros(m, dtype=complex)
    out[0] = np.exp(f[0])
    for k in range(1, m):
        acc = 0j
        for j in range(1, k + 1):
            acc += j * f[j] * out[k - j]
        out[k] = acc / k
    return out


def series_inv(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    m = len(y)
    out = np.zeros(m, dtype=complex)
    out[0] = 1 / y[0]
    for k in range(1, m):
        out[k] = -np.dot(y[1:k + 1], out[k - 1::-1][:k]) / y[0]
    return out
