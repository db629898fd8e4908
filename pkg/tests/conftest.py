import numpy as np
import pytest

from rotator_lab.chart import ChartState
from rotator_lab.profiles import FUNDAMENTAL, PARTNER, parse_profile

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def example_state():
    """V=(0.1,0,0), theta=pi/2, phi=0, w=(0.2,0.3): Q = 0.13/0.81."""
    return ChartState(theta=np.pi / 2, phi_sph=0.0, V=[0.1, 0.0, 0.0], theta_dot=0.2, phi_sph_dot=0.3)


@pytest.fixture
def affine():
    return parse_profile("affine:1")


ALL_PROFILES = [FUNDAMENTAL, PARTNER, parse_profile("affine:1"), parse_profile("deformed:0.01")]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
