import numpy as np
import pytest

from gnepkit import QuadraticPlusPenalty
from gnepkit.benchmarks import (
    asymmetric_binding_game,
    slack_game,
    symmetric_binding_game,
)


@pytest.fixture(scope="session")
def s0():
    return slack_game()


@pytest.fixture(scope="session")
def s1():
    return symmetric_binding_game()


@pytest.fixture(scope="session")
def s2():
    return asymmetric_binding_game()


@pytest.fixture(scope="session")
def penalty():
    return QuadraticPlusPenalty()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
