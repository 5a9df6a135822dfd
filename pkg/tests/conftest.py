import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fluidspace.catalog import builtin

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desitter():
    return builtin("desitter-torse")


@pytest.fixture(scope="session")
def desitter_points(desitter):
    return desitter.sample_points(seed=7, count=12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
