import math
from pathlib import Path

import pytest

from commongood.model import Diffusion, PlayerParams, ProfitSpec, Scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def make_scenario(mu=-1.0, sigma=1.0, r=1.0, nu=-0.3, ks=(1.0, 1.0), rho=None, x_c=-math.inf):
    return Scenario(Diffusion(mu, sigma), r, ProfitSpec(nu, rho, x_c),
                    tuple(PlayerParams(k) for k in ks))


@pytest.fixture
def ex1():
    return make_scenario()


@pytest.fixture
def ex2():
    return make_scenario(rho=2.0, x_c=-10.0)


@pytest.fixture
def det():
    return make_scenario(sigma=0.0)


@pytest.fixture
def scenario_dir():
    return SCENARIOS
