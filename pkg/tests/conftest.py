import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from horops.groups import builtin
from horops.orbit import enumerate_ball

settings.register_profile(
    "horops",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("horops")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def schottky6():
    P, theta, phi = builtin("schottky")
    return enumerate_ball(P, 6, theta=theta, phi=phi), theta, phi


@pytest.fixture(scope="session")
def cyclic20():
    P, theta, phi = builtin("cyclic")
    return enumerate_ball(P, 20, theta=theta, phi=phi), theta, phi


@pytest.fixture(scope="session")
def sym2_6():
    P, theta, phi = builtin("sym2-schottky")
    return enumerate_ball(P, 6, theta=theta, phi=phi), theta, phi


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
