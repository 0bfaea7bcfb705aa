import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from phasefilter.interferometer import InterferometerModel
from phasefilter.operators import DiagonalSpectrum

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py; printed once at the end of the session
ACCEPTANCE_LINES: list = []


@pytest.fixture
def qubit():
    """theta = diag(0, pi): one bright and one dark eigenstate."""
    return InterferometerModel.from_spec(DiagonalSpectrum([0.0, np.pi]))


@pytest.fixture
def plus_state():
    return np.full((2, 2), 0.5, dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
