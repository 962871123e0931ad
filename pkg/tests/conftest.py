"""Shared solved instances; session scope keeps the slow solves to one run."""

import numpy as np
import pytest

from laxopt.lax import solve_lax
from laxopt.model import gear_preset
from laxopt.net import uniform_net


@pytest.fixture(scope="session")
def gear_k20():
    return gear_preset(steps=20), solve_lax(gear_preset(steps=20), mode="hard")


@pytest.fixture(scope="session")
def gear_k50():
    return gear_preset(steps=50), solve_lax(gear_preset(steps=50), mode="hard")


@pytest.fixture(scope="session")
def gear_k100():
    return gear_preset(steps=100), solve_lax(gear_preset(steps=100), mode="hard")


@pytest.fixture(scope="session")
def gear_k20_unconstrained():
    p = gear_preset(steps=20)
    return p, solve_lax(p, mode="unconstrained")


@pytest.fixture(scope="session")
def experiment_net():
    return uniform_net(gear_preset().controls, 0.02)
