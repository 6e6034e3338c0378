import numpy as np
import pytest

from qloop.affine import eval_rep, fundamental_rep
from qloop.core import QParams, op_eval
from qloop.glmod import FINITE
from qloop.intertwine import intertwining_residual, solve_at, solve_L, solve_R
from qloop.osc import build_osc_rep

P = QParams(0.37j)
ZS = [0.8 + 0.3j, 1.4 - 0.2j, 0.6 - 0.7j, -1.1 + 0.4j, 0.9j]


def embed(M, i, j, d):
    """Operator on factors (i, j) of V (x) V (x) V."""
    M4 = M.reshape(d, d, d, d)
    k = ({0, 1, 2} - {i, j}).pop()
    out = np.zeros((d**3, d**3), dtype=complex)
    for idx in np.ndindex(d, d, d):
        for jdx in np.ndindex(d, d, d):
            if idx[k] == jdx[k]:
                out[np.ravel_multi_index(idx, (d,) * 3), np.ravel_multi_index(jdx, (d,) * 3)] = \
                    M4[idx[i], idx[j], jdx[i], jdx[j]]
    return out


def test_R_sparsity_n2():
    V = fundamental_rep(P, 2)
    R = solve_R(V, V)
    assert R.dim == 4
    assert np.count_nonzero(np.abs(op_eval(R, 0.7 + 0.1j)) > 1e-12) == 6


@pytest.mark.parametrize("n", [2, 3])
def test_yang_baxter(n):
    V = fundamental_rep(P, n)
    R = solve_R(V, V)
    rng = np.random.default_rng(1)
    for _ in range(5):
        z = rng.uniform(0.5, 1.5, 3) * np.exp(2j * np.pi * rng.uniform(size=3))
        R12 = embed(op_eval(R, z[0] / z[1]), 0, 1, n)
        R13 = embed(op_eval(R, z[0] / z[2]), 0, 2, n)
        R23 = embed(op_eval(R, z[1] / z[2]), 1, 2, n)
        lhs, rhs = R12 @ R13 @ R23, R23 @ R13 @ R12
        assert np.abs(lhs - rhs).max() / np.abs(lhs).max() < 1e-9


@pytest.mark.parametrize("lam", [(1, 0), (2, 0), (1, 0, 0), (1, 1, 0)])
def test_intertwining_and_held_out_point(lam):
    n = len(lam)
    aux, site = eval_rep(P, lam, FINITE), fundamental_rep(P, n)
    R = solve_R(aux, site)
    assert intertwining_residual(R, aux, site, ZS) < 1e-9
    z = 1.23 - 0.45j
    X = op_eval(R, z)
    Y = solve_at(aux, site, z, full=True)
    assert np.abs(X / X[0, 0] - Y).max() < 1e-9
    # invertible away from special points
    for z in ZS:
        M = op_eval(R, z)
        assert np.abs(M @ np.linalg.inv(M) - np.eye(M.shape[0])).max() < 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_L_operator(n):
    site = fundamental_rep(P, n)
    rho = build_osc_rep(P, n, 1, K=8)
    L = solve_L(rho, site)
    assert intertwining_residual(L, rho, site, ZS, full=False) < 1e-9
    # Cartan intertwining: L commutes with q^{nu (h (x) 1 + 1 (x) h)} on every coefficient
    for i in range(n):
        d = np.kron(rho.qh(np.eye(n)[i], 0.7), site.qh(np.eye(n)[i], 0.7))
        for _, C in L.terms():
            assert np.abs(d[:, None] * C - C * d[None, :]).max() < 1e-9 * max(1, np.abs(C).max())


def test_normalisation_is_cartan_factor():
    V = fundamental_rep(P, 2)
    R = solve_R(V, V)
    R0 = R.coeff(0)
    assert np.allclose(R0, np.diag(np.diag(R0)))
    # q^{B h1 (x) h1} with B = 1/2 on the fundamental: entries q^{1/2}, q^{-1/2}
    assert np.allclose(sorted(np.diag(R0), key=np.angle), sorted([P.pow(0.5), P.pow(-0.5), P.pow(-0.5), P.pow(0.5)], key=np.angle))
