import dataclasses

import pytest

from rclqr import presets


@pytest.fixture(scope="session")
def uav15():
    """UAV benchmark at the reformulated budget rho_bar = 15."""
    return presets.uav_problem(rho_bar=15.0)


@pytest.fixture(scope="session")
def uav8(uav15):
    """Same system and noise statistics at the original budget rho = 8."""
    return dataclasses.replace(uav15, rho=8.0)
