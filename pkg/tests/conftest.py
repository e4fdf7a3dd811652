import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from quarma.signal_model import NoiseSpec, QarmaSpec

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

EXAMPLE1_ALPHA = [
    [1.79, -0.1, -0.2, 0.0],
    [-1.85, 0.0, 0.1, -0.2],
    [1.27, 0.2, 0.0, 0.1],
    [-0.41, -0.1, 0.1, 0.0],
]
EXAMPLE1_BETA = [
    [0.9, -0.2, 0.1, 0.3],
    [-0.5, 0.5, 0.0, -0.2],
]


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen_oracles.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def example1_spec():
    return QarmaSpec(EXAMPLE1_ALPHA, EXAMPLE1_BETA)


@pytest.fixture(scope="session")
def example1_negated_spec():
    return QarmaSpec(EXAMPLE1_ALPHA, -np.array(EXAMPLE1_BETA))


@pytest.fixture(scope="session")
def gaussian_noise():
    return NoiseSpec("gaussian", 0.3, seed=0)
