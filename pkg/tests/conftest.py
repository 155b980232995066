import sys

import numpy as np
import pytest

from ifsthermo import pressure as P
from ifsthermo import transfer as T
from ifsthermo.config import load_config
from ifsthermo.grid import Grid
from ifsthermo.ifs import PotentialIFS, WeightedIFS

DYADIC = [["x1/2"], ["x1/2 + 1/2"]]
REFLECT = [["x1"], ["1 - x1"]]


def fixture_ifs(name, grid=None):
    return load_config(f"fixture:{name}").build(grid)


@pytest.fixture(scope="session")
def dyadic_exp():
    return fixture_ifs("dyadic_exp")


@pytest.fixture(scope="session")
def dyadic_exp_pair(dyadic_exp):
    return T.eigen_power(dyadic_exp, tol=1e-10)


@pytest.fixture(scope="session")
def dyadic_exp_state(dyadic_exp):
    return P.equilibrium(dyadic_exp)


@pytest.fixture(scope="session")
def balanced():
    return fixture_ifs("flip_balanced")


@pytest.fixture(scope="session")
def unbalanced():
    return fixture_ifs("flip_unbalanced")


@pytest.fixture
def small_grid():
    return Grid(1, 129)


def weighted(maps, weights, m=129, dim=1):
    return WeightedIFS(Grid(dim, m), maps, weights)


def potential(maps, psi, m=129, dim=1):
    return PotentialIFS(Grid(dim, m), maps, psi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
