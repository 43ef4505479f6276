import numpy as np
import pytest

from thinned_dpp.kernels import Potential2D, ginibre_finite
from thinned_dpp.orthopoly import Potential1D, cd_kernel, equilibrium_1d, hermite_recurrence


@pytest.fixture(scope="session")
def semicircle():
    return equilibrium_1d(Potential1D.quadratic())


@pytest.fixture(scope="session")
def gue20():
    J = hermite_recurrence(20, 60)
    return J, cd_kernel(J)


@pytest.fixture(scope="session")
def ginibre20():
    return ginibre_finite(Potential2D.quadratic(), 20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
