import itertools

import numpy as np
import pytest

from conftest import P, chain
from qloop import chain as C
from qloop.core import series_inv


def twisted_character(lam, phi):
    """sum over weights of q^{sum_i phi_i h_i(w) / n}, h_0 = w_n - w_1, h_i = w_i - w_{i+1}."""
    n = len(lam)
    if n == 2:
        ws = [(lam[0] - k, lam[1] + k) for k in range(int(round(lam[0] - lam[1])) + 1)]
    else:
        l1, l2, l3 = lam
        ws = [(k, m1 + m2 - k, l1 + l2 + l3 - m1 - m2)
              for m1 in range(l2, l1 + 1) for m2 in range(l3, l2 + 1) for k in range(m2, m1 + 1)]
    out = 0
    for w in ws:
        h = [w[-1] - w[0]] + [w[i] - w[i + 1] for i in range(n - 1)]
        out += P.pow(sum(p * x for p, x in zip(phi, h)) / n)
    return out


@pytest.mark.parametrize("lam", [(1, 0), (0.5, -0.5), (2, 0), (3, 1), (1, 0, 0), (1, 1, 0), (2, 1, 0)])
def test_scalar_chain_transfer_is_character(lam):
    c = chain(len(lam), 0)
    T = C.build_T("finite", lam, c).payload
    assert T.dim == 1 and T.dmax == 0
    assert abs(T.coeff(0)[0, 0] - twisted_character(lam, c.phi.phi)) < 1e-12


def test_scalar_chain_Q_is_geometric_series():
    c = chain(2, 0)
    x = c.phi.phi[1] - c.phi.phi[0]
    for i, sign in ((1, 1), (2, -1)):
        Q = C.build_Q(i, False, c).payload
        assert abs(Q.coeff(0)[0, 0] - 1 / (1 - P.pow(sign * x))) < 1e-12


def test_monodromy_empty_chain_is_identity():
    c = chain(3, 0)
    M = C.build_monodromy(C.finite_T((1, 0, 0)), c)
    assert M.dmax == 0 and np.allclose(M.coeff(0), np.eye(3))


@pytest.mark.parametrize("n,N,lam", [(2, 2, (1, 0)), (2, 3, (2, 0)), (3, 1, (1, 0, 0)), (3, 2, (1, 1, 0))])
def test_transfer_matches_monodromy_trace_up_to_scalar(n, N, lam):
    c = chain(n, N, order=5)
    aux = C.finite_T(lam)
    M = C.build_monodromy(aux, c)
    rep = aux.make(c)
    da, t = rep.dim, rep.twist_diag(c.phi)
    tr = np.zeros((c.order + 1, c.dim, c.dim), dtype=complex)
    for d, Cm in M.terms():
        if 0 <= d <= c.order:
            tr[d] = np.einsum("a,aiaj->ij", t, Cm.reshape(da, c.dim, da, c.dim))
    T = C.build_T("finite", lam, c).payload
    Tc = np.array([T.coeff(k) for k in range(c.order + 1)])
    f = np.convolve(Tc[:, 0, 0], series_inv(tr[:, 0, 0]))[: c.order + 1]
    rec = np.array([sum(f[j] * tr[m - j] for j in range(m + 1)) for m in range(c.order + 1)])
    assert np.abs(rec - Tc).max() < 1e-10 * np.abs(Tc).max()


@pytest.mark.parametrize("n,N", [(2, 2), (3, 1)])
def test_operators_preserve_weight(n, N):
    c = chain(n, N)
    hs = np.array([c.cartan(i) for i in range(n)])
    same = np.all(hs[:, :, None] == hs[:, None, :], axis=0)
    ops = [C.build_T("finite", (1,) + (0,) * (n - 1), c)] + [C.build_Q(i, b, c) for i in range(1, n + 1)
                                                           for b in (False, True)]
    for op in ops:
        for _, M in op.payload.terms():
            assert np.abs(M[~same]).max(initial=0) < 1e-12 * max(1, np.abs(M).max())


@pytest.mark.parametrize("n,N", [(2, 2), (3, 1)])
def test_oscillator_traces_converge_geometrically(n, N):
    c = chain(n, N)
    for i, b in itertools.product(range(1, n + 1), (False, True)):
        d = C.build_Q(i, b, c).meta["cauchy_deltas"]
        assert d[1] == 0 or d[1] <= d[0] / 10
        assert d[-1] < 1e-10


def test_truncation_too_small_raises():
    c = chain(2, 1)
    with pytest.raises(C.ConvergenceError) as e:
        C.build_T("verma", (0.3, -0.2), c, K=2)
    assert e.value.diagnostics["cauchy_deltas"]
    with pytest.raises(C.ConvergenceError):
        C.build_Q(1, False, c, K=2)
    T = C.build_T("verma", (0.3, -0.2), c, K=2, strict=False)
    assert not T.meta["converged"]


def test_export_round_trip():
    c = chain(2, 2)
    T = C.build_T("finite", (1, 0), c).payload
    d = C.export_dict(T, "T", "(1,0)")
    back = C.import_dict(d)
    assert back.dmin == T.dmin and back.order == T.order
    assert (back - T).norm() == 0


def test_q_limit_rejects_unsupported():
    with pytest.raises(ValueError):
        C.q_limit_check(chain(3, 1))
    with pytest.raises(ValueError):
        C.q_limit_check(chain(2, 1))


def test_q_limit_scalar_chain_exact():
    from qloop.core import QParams
    c = chain(2, 0, p=QParams(0.45 + 0.3j), phi=(3j, -3j))
    r = C.q_limit_check(c, mus=(4, 8))
    assert max(r["distances"]) < 1e-12


def test_invalid_chain_descriptors():
    from qloop.affine import TwistPhi
    with pytest.raises(ValueError):
        C.ChainSpec(4, 1, P, TwistPhi((1j, -1j, 0, 0)))
    with pytest.raises(ValueError):
        C.ChainSpec(2, -1, P, TwistPhi((1j, -1j)))
    with pytest.raises(ValueError):
        C.ChainSpec(2, 2, P, TwistPhi((1j, -1j)), inhom=(1.0, 0.0))
