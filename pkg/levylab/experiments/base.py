"""Shared helpers for experiments."""
import time

import numpy as np

from ..malliavin import tensor_bump_functional
from ..measures import LevyTriplet, Rect
from ..paths import derive_seed

X_GRID = (-2.0, -0.75, -0.25, 0.25, 0.75, 1.25, 2.0)


def aux_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for experiment parameters, independent of the path streams."""
    return np.random.default_rng(derive_seed(seed, stream))


class Stopwatch:
    """Wall-clock seconds since construction."""

    def __init__(self):
        self.start = time.perf_counter()

    def seconds(self, share: int = 1) -> float:
        return (time.perf_counter() - self.start) / max(share, 1)


def grid_rect(rng: np.random.Generator, t_lo: float, t_hi: float, slots: int = 4) -> Rect:
    """Rectangle with time endpoints on a grid of (t_lo, t_hi] and sizes from X_GRID."""
    times = np.linspace(t_lo, t_hi, slots + 1)
    i, j = sorted(rng.choice(times.size, 2, replace=False))
    a, b = sorted(rng.choice(len(X_GRID), 2, replace=False))
    return Rect(float(times[i]), float(times[j]), X_GRID[a], X_GRID[b])


def rect_list(r: Rect) -> list[float]:
    return [r.t_lo, r.t_hi, r.x_lo, r.x_hi]


def random_bump_functional(rng: np.random.Generator, horizon: float):
    """Tensor of cubic smoothstep bumps at one to three grid times."""
    grid = np.linspace(0.0, horizon, 13)[1:]
    k = int(rng.integers(1, 4))
    times = sorted(float(t) for t in rng.choice(grid, k, replace=False))
    centers = rng.uniform(-1.5, 1.5, k)
    radii = rng.uniform(1.0, 3.0, k)
    return tensor_bump_functional(times, centers, radii)


def sample_sizes(rng: np.random.Generator, triplet: LevyTriplet, count: int) -> np.ndarray:
    """x values cycling through 0, the nodes of nu and random non-zero sizes."""
    atoms = np.asarray(triplet.nu.nodes()[0], dtype=float)
    fixed = np.concatenate([[0.0], atoms[:8]])
    extra = rng.uniform(0.1, 2.0, count) * rng.choice([-1.0, 1.0], count)
    return np.concatenate([fixed, extra])[:max(count, fixed.size)]


def rect_from_list(values) -> Rect:
    return Rect(*(float(v) for v in values))
