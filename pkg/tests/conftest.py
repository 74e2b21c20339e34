import numpy as np
import pytest

from cablempc.params import CableParams
from cablempc.training import TrainingConfig, train_bases


@pytest.fixture(scope="session")
def params():
    return CableParams()


@pytest.fixture(scope="session")
def bases(params):
    """POD bases for both modes and both variants (trained once per session)."""
    return train_bases(params, TrainingConfig())


@pytest.fixture(scope="session")
def proposed(bases):
    return {q: bases[(q, "proposed")] for q in (0, 1)}


@pytest.fixture(scope="session")
def baseline(bases):
    return {q: bases[(q, "baseline")] for q in (0, 1)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
