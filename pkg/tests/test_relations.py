import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import P, chain
from qloop.core import LaurentOp
from qloop.relations import (RELATIONS, OperatorSet, RelationConstants, WeylOrbit, YoungShape, calibrate, op_det,
                             relative_residual, verify)
from test_chain import twisted_character


def _ok(reports):
    bad = [(r.name, r.residual, r.tol, r.status) for r in reports if r.status == "fail"]
    assert not bad, bad
    assert any(r.status == "pass" for r in reports)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_young_transpose_is_involution(a, b):
    l1, l2 = max(a, b), min(a, b)
    t = YoungShape(l1, l2).transpose
    assert sum(t) == l1 + l2
    back = [sum(1 for x in t if x > k) for k in range(2)]
    assert tuple(back) == (l1, l2)


def test_young_rejects_non_partition():
    with pytest.raises(ValueError):
        YoungShape(1, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.data())
def test_dot_action_is_group_action(n, data):
    W = WeylOrbit(n)
    els = list(W.elements())
    assert len(els) == int(np.prod(range(1, n + 1)))
    assert sum(s for _, s in els) == 0
    lam = data.draw(st.tuples(*[st.integers(-3, 3)] * n))
    p1, _ = data.draw(st.sampled_from(els))
    p2, _ = data.draw(st.sampled_from(els))
    comp = tuple(p2[i] for i in p1)
    assert np.allclose(W.dot(comp, lam), W.dot(p1, W.dot(p2, lam)))


@pytest.mark.parametrize("lam", [(1, 0, 0), (2, 1, 0), (2, 2, 1), (3, 1, 0)])
def test_weyl_character_formula_on_torus(lam):
    # sum_w sign(w) x^{w.lam} / sum_w sign(w) x^{w.0} against the Gelfand-Tsetlin sum
    W = WeylOrbit(3)
    phi = chain(3, 0).phi.phi
    def mono(w):
        h = [w[-1] - w[0]] + [w[i] - w[i + 1] for i in range(2)]
        return P.pow(sum(p * x for p, x in zip(phi, h)) / 3)
    num = sum(s * mono(np.asarray(W.dot(pm, lam)) + W.rho) for pm, s in W.elements())
    den = sum(s * mono(np.asarray(W.dot(pm, (0, 0, 0))) + W.rho) for pm, s in W.elements())
    assert abs(num / den - twisted_character(lam, phi)) < 1e-9 * abs(num / den)


def test_op_det_leibniz_matches_numpy():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    d = op_det(lambda a, b: LaurentOp.const(np.array([[M[a, b]]])), 3)
    assert abs(d.coeff(0)[0, 0] - np.linalg.det(M)) < 1e-12
    d0 = op_det(lambda a, b: None if a == b == 0 else LaurentOp.const(np.array([[M[a, b]]])), 3)
    M0 = M.copy()
    M0[0, 0] = 0
    assert abs(d0.coeff(0)[0, 0] - np.linalg.det(M0)) < 1e-12


def test_calibrate_recovers_scalar():
    rng = np.random.default_rng(1)
    X = LaurentOp(rng.normal(size=(3, 2, 2)) + 0j, 0, 2)
    k, fit, res = calibrate(X * (-1.5 + 0.5j), X)
    assert abs(k * (-1.5 + 0.5j) - 1) < 1e-12 or abs(k - (-1.5 + 0.5j)) < 1e-12
    assert fit < 1e-12 and res < 1e-12
    assert relative_residual(X - X, [X]) == 0


def test_constants_sum_to_zero(ops2, ops3):
    for ops in (ops2, ops3):
        D = ops.const.D
        assert np.abs(sum(D.values())).max() < 1e-12


def test_degenerate_twist_rejected():
    c = chain(2, 2, phi=(0.0, 0.0))
    with pytest.raises(ValueError):
        RelationConstants.build(c)


def test_unknown_relation(ops2):
    with pytest.raises(KeyError):
        verify(ops2, ["nope"])


def test_registry_names():
    assert set(RELATIONS) == {"commutativity", "double_Q", "key_relation", "bgg", "det_T", "TQ", "TT",
                              "jacobi_trudi", "bar_shift", "shifted_transfer", "q_limit"}


@pytest.mark.parametrize("name", ["commutativity", "key_relation", "bgg", "det_T", "TQ", "TT", "bar_shift",
                                  "shifted_transfer"])
def test_relations_rank2(ops2, name):
    _ok(RELATIONS[name](ops2))


def test_rank2_absent_rows(ops2):
    assert all(r.status == "absent" for r in RELATIONS["double_Q"](ops2))
    assert all(r.status == "absent" for r in RELATIONS["q_limit"](ops2))
    assert all(r.status == "absent" for r in RELATIONS["jacobi_trudi"](ops2))


@pytest.mark.parametrize("name", ["double_Q", "det_T", "TQ", "TT", "jacobi_trudi", "bar_shift", "shifted_transfer"])
def test_relations_rank3(ops3, name):
    _ok(RELATIONS[name](ops3))


def test_q_limit_converges(ops_limit):
    _ok(RELATIONS["q_limit"](ops_limit))


def test_calibrations_are_consistent(ops3):
    reps = verify(ops3, ["double_Q", "det_T"])
    cons = [r for r in reps if r.name == "calibration_consistency"]
    assert cons and cons[0].passed
    for r in reps:
        if r.calibration is not None:
            assert abs(abs(r.calibration) - 1) < 1e-9


def test_commutativity_rank2_longer_chain():
    _ok(RELATIONS["commutativity"](OperatorSet(chain(2, 3, order=6))))
