import os

import pytest
from hypothesis import HealthCheck, settings

from hessosc import PolyPhase

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def xs():
    return PolyPhase.variables(2)


@pytest.fixture(scope="session")
def cusp(xs):
    x1, x2 = xs
    return (x2 + x1**2) ** 2


@pytest.fixture(scope="session")
def cubic(xs):
    x1, x2 = xs
    return x1**3 + x2**3


@pytest.fixture(scope="session")
def quad(xs):
    x1, x2 = xs
    return (x1**2 + x2**2) / 2


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
