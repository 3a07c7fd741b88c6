import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from l1nmpc.harness.config import default_scenario
from l1nmpc.rigid_body import VehicleParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def params(scenario):
    return scenario.nominal_params


@pytest.fixture
def square_params():
    """Symmetric 0.15 m geometry with c_tau = 0.01, no drag."""
    return VehicleParams(mass=1.0, inertia_diag=(0.01, 0.01, 0.02), arm_x=(0.15,) * 4,
                         arm_y=(0.15,) * 4, drag_torque_coeff=0.01,
                         drag_matrix_diag=(0.0, 0.0, 0.0), thrust_max=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from _helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
