from pathlib import Path

import numpy as np
import pytest

from src.problem import svp_problem
from src.simulator import StateVector

CONFIGS = Path(__file__).resolve().parent.parent / 'configs'


@pytest.fixture
def svp():
    return svp_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def configs_dir():
    return CONFIGS


def random_state(rng, n):
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(n, amps / np.linalg.norm(amps))
