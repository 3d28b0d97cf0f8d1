import numpy as np
import pytest

from src.config.model_config import PalmConfig
from src.centers.maximin import maximin_centers
from src.palm.model import fit_palm
from src.testbed.data import TrainingSet, add_noise, grid_design
from src.testbed.functions import HERBIE_BOUNDS, herbies_tooth


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_cfg():
    return PalmConfig(n=20, n0=6, n_cand=80, cap_subsets=2, cap_subset_size=60)


@pytest.fixture(scope="session")
def herbie_data():
    X = grid_design(16, HERBIE_BOUNDS)
    return TrainingSet.from_arrays(X, herbies_tooth(X), bounds=HERBIE_BOUNDS)


@pytest.fixture(scope="session")
def noisy_herbie_data():
    X = grid_design(16, HERBIE_BOUNDS)
    y = add_noise(herbies_tooth(X), 0.05, seed=3)
    return TrainingSet.from_arrays(X, y, bounds=HERBIE_BOUNDS)


@pytest.fixture(scope="session")
def small_palm(herbie_data, small_cfg):
    centers = maximin_centers(9, 2, seed=1).C
    return fit_palm(herbie_data, centers, small_cfg, seed=2)
