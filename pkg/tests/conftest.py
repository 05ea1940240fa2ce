"""Shared fixtures."""
import numpy as np
import pytest

from levylab.config import build_triplet
from levylab.measures import AtomicJumps, LevyTriplet
from levylab.paths import Path

SEED = 20240601


@pytest.fixture
def triplet():
    """sigma = 1, nu = 2 delta_1 + delta_{-0.5}, b = 0."""
    return LevyTriplet(0.0, 1.0, AtomicJumps.of((1.0, 2.0), (-0.5, 1.0)))


@pytest.fixture
def pure_jump():
    """sigma = 0, b = 0, nu = 2 delta_1."""
    return LevyTriplet(0.0, 0.0, AtomicJumps.of((1.0, 2.0)))


@pytest.fixture
def seed():
    return SEED


@pytest.fixture
def quiet_path(pure_jump):
    """A path without jumps on the grid 0, 1/4, ..., 1."""
    def build(grid=np.linspace(0.0, 1.0, 5), jump_times=(), jump_sizes=()):
        grid = np.asarray(grid, dtype=float)
        return Path(1.0, grid, np.zeros(grid.size), np.asarray(jump_times, dtype=float),
                    np.asarray(jump_sizes, dtype=float), pure_jump)
    return build


@pytest.fixture
def density_triplet():
    """sigma = 0.5, nu = 1.5 truncated N(1, 0.5^2) on [0.25, 2]."""
    return build_triplet({"drift": 0.0, "sigma": 0.5, "jumps": {"density": {
        "family": "truncated_normal", "intensity": 1.5, "lo": 0.25, "hi": 2.0, "mean": 1.0,
        "sd": 0.5}}})
