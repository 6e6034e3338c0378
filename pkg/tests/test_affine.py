import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qloop.affine import (BorelViolation, GradationS, TwistPhi, antipode_check, balancing_factors, barred_rep,
                          cartan_matrix_affine, check_affine_relations, eval_rep, fundamental_rep, rescale_e,
                          sign_flip)
from qloop.core import QParams
from qloop.glmod import FINITE, VERMA
from qloop.osc import build_osc_rep

P = QParams(0.37j)


def test_cartan_matrix():
    assert (cartan_matrix_affine(2) == [[2, -2], [-2, 2]]).all()
    assert (cartan_matrix_affine(3) == [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]).all()


@pytest.mark.parametrize("lam", [(1, 0), (2, 0), (1, 0, 0), (1, 1, 0), (2, 1, 0)])
def test_evaluation_relations_finite(lam):
    rep = eval_rep(P, lam, FINITE)
    assert check_affine_relations(rep) < 1e-10
    dual = tuple(-x for x in reversed(lam))
    assert check_affine_relations(barred_rep(eval_rep(P, dual, FINITE))) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)),
       st.sampled_from([(1, 1, 1), (1, 0, 0), (0, 1, 2)]))
def test_evaluation_relations_verma_generic(lam, s):
    rep = eval_rep(P, lam, VERMA, K=5, grad=GradationS(s))
    assert check_affine_relations(rep) < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.3, 3.0), min_size=3, max_size=3))
def test_gauge_rescaling_preserves_relations(c):
    c = np.array(c) / np.prod(c) ** (1 / 3)
    rep = eval_rep(P, (0.3, -0.4, 0.1), VERMA, K=5)
    assert check_affine_relations(rescale_e(rep, c)) < 1e-9
    assert check_affine_relations(sign_flip(rep)) < 1e-9


def test_balancing_factors_have_unit_product():
    rep = eval_rep(P, (0.3, -0.4, 0.1), VERMA, K=3)
    assert np.isclose(np.prod(balancing_factors(rep)), 1)


def test_rescale_needs_unit_product():
    rep = fundamental_rep(P, 3)
    with pytest.raises(ValueError):
        rescale_e(rep, [2.0, 1.0, 1.0])


def test_fundamental_has_zero_trace_cartan():
    for n in (2, 3):
        rep = fundamental_rep(P, n)
        assert np.allclose(rep.h.sum(axis=1), 0)


def test_antipode_counit():
    assert antipode_check(fundamental_rep(P, 3)) < 1e-12


def test_borel_representation_has_no_f():
    rho = build_osc_rep(P, 2, 1, K=4)
    assert rho.borel
    with pytest.raises(BorelViolation):
        rho.f_at(0, 1.0)


def test_shift_moves_cartan_only():
    rep = fundamental_rep(P, 3)
    xi = (0.2, -0.1, 0.3)
    sh = rep.with_shift(xi)
    assert np.allclose(sh.h - rep.h, np.array(xi)[:, None])
    for a, b in zip(sh.e, rep.e):
        assert abs(a - b).max() == 0
    assert sh.with_shift(tuple(-x for x in xi)).xi == (0, 0, 0)


def test_twist_constraint():
    with pytest.raises(ValueError):
        TwistPhi((1.0, 0.5))
    with pytest.raises(ValueError):
        GradationS((1, -1))
