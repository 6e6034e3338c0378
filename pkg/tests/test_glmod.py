import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qloop.core import QParams
from qloop.glmod import FINITE, VERMA, Weight, WeightError, build_gl, check_gl_relations, gl_relation_residuals

P = QParams(0.37j)


def gt_weights(lam):
    """Weights of V^lam for gl_3 from Gelfand-Tsetlin patterns (independent of the module construction)."""
    l1, l2, l3 = lam
    out = []
    for m1 in range(l2, l1 + 1):
        for m2 in range(l3, l2 + 1):
            for k in range(m2, m1 + 1):
                out.append((k, m1 + m2 - k, l1 + l2 + l3 - m1 - m2))
    return sorted(out)


@pytest.mark.parametrize("lam", [(1, 0, 0), (1, 1, 0), (2, 1, 0), (2, 0, 0), (3, 1, 0), (2, 2, 1)])
def test_gl3_finite_weights_match_gelfand_tsetlin(lam):
    m = build_gl(P, lam, FINITE)
    got = sorted(tuple(int(round(x)) for x in np.real(m.G[:, k])) for k in range(m.dim))
    assert got == gt_weights(lam)
    assert check_gl_relations(m) < 1e-10


@pytest.mark.parametrize("lam", [(1, 0), (2, 0), (3, 1), (0.5, -0.5)])
def test_gl2_finite(lam):
    m = build_gl(P, lam, FINITE)
    assert m.dim == int(round(lam[0] - lam[1])) + 1
    assert check_gl_relations(m) < 1e-10


weights3 = st.tuples(*[st.floats(-2, 2, allow_nan=False) for _ in range(3)])
weights2 = st.tuples(*[st.floats(-2, 2, allow_nan=False) for _ in range(2)])


@settings(max_examples=25, deadline=None)
@given(weights3)
def test_gl3_verma_relations_generic(lam):
    m = build_gl(P, lam, VERMA, K=5)
    assert check_gl_relations(m) < 1e-9


@settings(max_examples=25, deadline=None)
@given(weights2)
def test_gl2_verma_relations_generic(lam):
    m = build_gl(P, lam, VERMA, K=8)
    assert check_gl_relations(m) < 1e-9


def test_gl3_verma_basis_size():
    K = 6
    m = build_gl(P, (0.3, -0.4, 0.1), VERMA, K=K)
    assert m.dim == sum((d + 1) * (d + 2) // 2 for d in range(K + 1))


def test_gl2_verma_singular_vector_at_integral_weight():
    # E F^{l1-l2+1} v_0 = 0: the matrix element of E into level l1-l2 vanishes
    m = build_gl(P, (2, 0), VERMA, K=6)
    E = m.E[0].toarray()
    assert abs(E[2, 3]) < 1e-12
    assert abs(E[1, 2]) > 1e-3


def test_gl3_composite_root_vectors():
    m = build_gl(P, (0.2, 0.7, -0.3), VERMA, K=5)
    res = gl_relation_residuals(m)
    assert res["F3 = F2F1 - qF1F2"] < 1e-10
    assert res["E3 = E1E2 - q^-1E2E1"] < 1e-10


def test_finite_needs_dominant_integral():
    with pytest.raises(WeightError):
        build_gl(P, (0, 1), FINITE)
    with pytest.raises(WeightError):
        build_gl(P, (0.5, 0, 0), FINITE)
    with pytest.raises(WeightError):
        Weight((1, 0, 0, 0))
