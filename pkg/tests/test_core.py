import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qloop.core import (LaurentOp, LaurentPoly, QError, QParams, op_eval, op_kron, op_shift, qbinom,
                        qfactorial, qnum, series_exp, series_inv, series_log)

P = QParams(0.37j)

cplx = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def rand_op(seed, dim=3, lo=-2, hi=3, order=None):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(hi - lo + 1, dim, dim)) + 1j * rng.normal(size=(hi - lo + 1, dim, dim))
    return LaurentOp(c, lo, order)


def test_qnum_values():
    q = P.q
    assert np.isclose(qnum(P, 2), q + 1 / q)
    assert np.isclose(qnum(P, 3), q**2 + 1 + q**-2)
    assert np.isclose(qfactorial(P, 3), qnum(P, 1) * qnum(P, 2) * qnum(P, 3))
    assert np.isclose(qbinom(P, 4, 2), qfactorial(P, 4) / qfactorial(P, 2) ** 2)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_qnum_addition_rule(a, b):
    # [a+b] = q^b [a] + q^-a [b]
    lhs = qnum(P, a + b)
    rhs = P.pow(b) * qnum(P, a) + P.pow(-a) * qnum(P, b)
    assert abs(lhs - rhs) < 1e-9 * max(1, abs(lhs))


@given(st.integers(1, 8), st.integers(0, 8))
def test_qbinom_pascal(m, k):
    k = min(k, m)
    if 0 < k < m:
        lhs = qbinom(P, m, k)
        rhs = P.pow(k) * qbinom(P, m - 1, k) + P.pow(-(m - k)) * qbinom(P, m - 1, k - 1)
        assert abs(lhs - rhs) < 1e-9 * max(1, abs(lhs))


def test_root_of_unity_rejected():
    with pytest.raises(QError):
        QParams(1j * np.pi / 3)
    with pytest.raises(QError):
        QParams(0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), cplx.filter(lambda z: abs(z) > 0.2))
def test_product_evaluates_to_matrix_product(s1, s2, z):
    a, b = rand_op(s1), rand_op(s2)
    assert np.allclose(op_eval(a @ b, z), op_eval(a, z) @ op_eval(b, z), atol=1e-8 * max(1, abs(z)) ** 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_product_associative_and_distributive(s1, s2, s3):
    a, b, c = rand_op(s1), rand_op(s2), rand_op(s3)
    assert ((a @ b) @ c - a @ (b @ c)).norm() < 1e-10 * max(1, (a @ b @ c).norm())
    assert (a @ (b + c) - (a @ b + a @ c)).norm() < 1e-10 * max(1, (a @ b).norm())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), cplx.filter(lambda z: abs(z) > 0.3), cplx.filter(lambda z: abs(z) > 0.3))
def test_shift_composes(s, c1, c2):
    a = rand_op(s)
    lhs = op_shift(op_shift(a, c1), c2)
    rhs = op_shift(a, c1 * c2)
    assert (lhs - rhs).norm() < 1e-10 * max(1, rhs.norm())


def test_truncated_series_order_propagates():
    a = rand_op(1, lo=0, hi=4, order=4)
    b = rand_op(2, lo=1, hi=3)
    prod = a @ b
    assert prod.order == 5
    assert prod.dmax <= 5


def test_kron_matches_numpy():
    a, b = rand_op(3, dim=2), rand_op(4, dim=2)
    z = 0.7 + 0.2j
    assert np.allclose(op_eval(op_kron(a, b), z), np.kron(op_eval(a, z), op_eval(b, z)))


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=6, max_size=6))
def test_series_exp_log_inverse(c):
    y = np.array([1.0] + list(c[1:]), dtype=complex)
    assert np.allclose(series_exp(series_log(y)), y, atol=1e-8 * max(1, np.abs(y).max()) ** 6)
    inv = series_inv(y)
    assert np.allclose(np.convolve(inv, y)[: len(y)], np.eye(1, len(y))[0], atol=1e-7 * max(1, np.abs(y).max()) ** 6)


def test_laurent_poly_entry():
    a = rand_op(5)
    e = a.entry(1, 2)
    assert isinstance(e, LaurentPoly)
    z = 0.4 - 0.9j
    assert np.isclose(sum(c * z ** (e.dmin + k) for k, c in enumerate(e.coeffs)), op_eval(a, z)[1, 2])
