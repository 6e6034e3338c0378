import sys
import numpy as np
import pytest

from qloop.affine import TwistPhi
from qloop.chain import ChainSpec
from qloop.core import QParams
from qloop.relations import OperatorSet

P = QParams(0.37j)
PHI2 = (1.6j, -1.6j)
PHI3 = tuple(5j * np.array([1.7, -0.6, -1.1]))


def chain(n, N, order=None, p=P, phi=None):
    phi = phi or (PHI2 if n == 2 else PHI3)
    return ChainSpec(n, N, p, TwistPhi(phi), order=order or (8 if n == 2 else 6))


@pytest.fixture(scope="session")
def p():
    return P


@pytest.fixture(scope="session")
def ops2():
    return OperatorSet(chain(2, 2))


@pytest.fixture(scope="session")
def ops2_1():
    return OperatorSet(chain(2, 1))


@pytest.fixture(scope="session")
def ops3():
    return OperatorSet(chain(3, 1))


@pytest.fixture(scope="session")
def ops_limit():
    return OperatorSet(chain(2, 1, order=6, p=QParams(0.45 + 0.3j), phi=(3j, -3j)))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end run")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
