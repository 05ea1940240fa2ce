"""Path simulation and deterministic Monte Carlo replication."""
import math
import multiprocessing
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError, NonFiniteError
from .log import get_logger
from .measures import LevyTriplet

logger = get_logger(__name__)

THREADS_ENV = "LEVYLAB_THREADS"
POOL_ENV = "LEVYLAB_POOL"
CHUNKS_PER_WORKER = 4
MAX_TIE_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class Path:
    """One trajectory: Brownian values on a time grid plus an explicit jump list."""

    horizon: float
    grid: np.ndarray
    brownian: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    triplet: LevyTriplet
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.grid[0] != 0.0 or self.brownian[0] != 0.0:
            raise DomainError("grid must start at time 0 with W(0) = 0")
        if np.any(np.diff(self.jump_times) <= 0.0):
            raise DomainError("jump times must be strictly increasing")
        counts = np.searchsorted(self.jump_times, self.grid, side="right")
        cumulative = np.concatenate([[0.0], np.cumsum(self.jump_sizes)])
        x = self.triplet.drift * self.grid + self.triplet.sigma * self.brownian + cumulative[counts]
        x.setflags(write=False)
        object.__setattr__(self, "values", x)

    def index(self, times) -> np.ndarray:
        """Grid indices of the given times; every time must be a grid time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.searchsorted(self.grid, times)
        ok = (idx < self.grid.size)
        ok[ok] = self.grid[idx[ok]] == times[ok]
        if not ok.all():
            raise DomainError(f"times not on the path grid: {times[~ok].tolist()}")
        return idx

    def X(self, times) -> np.ndarray:
        return self.values[self.index(times)]

    def W(self, times) -> np.ndarray:
        return self.brownian[self.index(times)]

    def jumps_in(self, s: float, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Jumps with time in (s, t]."""
        lo = np.searchsorted(self.jump_times, s, side="right")
        hi = np.searchsorted(self.jump_times, t, side="right")
        return self.jump_times[lo:hi], self.jump_sizes[lo:hi]


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with standard error."""

    mean: float
    stderr: float
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("an estimate needs at least two replicates")

    def agrees_with(self, target: float, k: float = 4.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr

    @classmethod
    def from_values(cls, values: np.ndarray, seed: int) -> "MCEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        return cls(float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(n)), n, seed)


def replicate_rng(master_seed: int, replicate_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (master_seed, replicate_index)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(replicate_index,))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed: int, stream: int) -> int:
    """Independent 64-bit master seed for an auxiliary run."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(2 ** 32 + stream,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _draw_jump_times(rng: np.random.Generator, k: int, horizon: float) -> np.ndarray:
    times = np.sort(horizon * (1.0 - rng.random(k)))
    for _ in range(MAX_TIE_REDRAWS):
        ties = np.flatnonzero(np.diff(times) == 0.0)
        if ties.size == 0:
            return times
        times[ties] = horizon * (1.0 - rng.random(ties.size))
        times.sort()
    raise DomainError("could not separate tied jump times")


def simulate_path(triplet: LevyTriplet, horizon: float, required_times: Iterable[float],
                  replicate_index: int, master_seed: int) -> Path:
    """Simulate one path; a pure function of (master_seed, replicate_index)."""
    if not horizon > 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    required = np.asarray(sorted(required_times), dtype=float)
    if required.size and (required[0] < 0.0 or required[-1] > horizon):
        raise DomainError(f"required times must lie in [0, {horizon}]")
    rng = replicate_rng(master_seed, replicate_index)

    k = int(rng.poisson(triplet.nu.mass() * horizon))
    jump_times = _draw_jump_times(rng, k, horizon)
    jump_sizes = triplet.nu.sample(rng, k)

    grid = np.union1d(np.union1d(required, [0.0, horizon]), jump_times)
    dw = rng.standard_normal(grid.size - 1) * np.sqrt(np.diff(grid))
    brownian = np.concatenate([[0.0], np.cumsum(dw)])
    return Path(horizon, grid, brownian, jump_times, jump_sizes, triplet)


def increment(path: Path, s: float, t: float) -> float:
    """X(t) - X(s) for grid times s < t."""
    if not s < t:
        raise DomainError(f"increment needs s < t, got {s}, {t}")
    xs, xt = path.X([s, t])
    return float(xt - xs)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _pool_kind() -> str:
    kind = os.environ.get(POOL_ENV, "process").strip().lower()
    if kind == "process" and "fork" not in multiprocessing.get_all_start_methods():
        logger.warning("fork is unavailable here; falling back to threads")
        return "thread"
    return kind if kind in ("process", "thread") else "process"


@dataclass(frozen=True)
class _Job:
    """One Monte Carlo run, shared with forked workers through a module slot."""

    estimator: Callable[[Path], np.ndarray]
    master_seed: int
    triplet: LevyTriplet
    horizon: float
    required: list[float]

    def one(self, i: int) -> np.ndarray:
        path = simulate_path(self.triplet, self.horizon, self.required, i, self.master_seed)
        value = np.atleast_1d(np.asarray(self.estimator(path), dtype=float))
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"estimator returned {value.tolist()} at replicate {i}", i)
        return value

    def chunk(self, bounds: tuple[int, int]) -> np.ndarray:
        return np.vstack([self.one(i) for i in range(*bounds)])


# set before the pool forks; workers read it and never run nested pools
_ACTIVE_JOB: _Job | None = None
_IN_WORKER = False


def _mark_worker():
    global _IN_WORKER
    _IN_WORKER = True


def _run_chunk(bounds: tuple[int, int]) -> np.ndarray:
    return _ACTIVE_JOB.chunk(bounds)


def _forked_chunks(job: _Job, spans: list[tuple[int, int]], workers: int) -> list[np.ndarray]:
    global _ACTIVE_JOB
    _ACTIVE_JOB = job
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers, initializer=_mark_worker) as pool:
            return pool.map(_run_chunk, spans)
    finally:
        _ACTIVE_JOB = None


def mc_run_vector(estimator: Callable[[Path], np.ndarray], n: int, master_seed: int,
                  triplet: LevyTriplet, horizon: float, required_times: Iterable[float],
                  threads: int | None = None) -> list[MCEstimate]:
    """Run a vector-valued estimator over n replicates, one estimate per component.

    Replicates are split into index chunks, run on forked worker processes
    (or threads, see LEVYLAB_POOL) and stacked back in index order before the
    reduction, so the result does not depend on the number of workers.
    """
    if n < 2:
        raise DomainError("need at least two replicates")
    required = sorted(set(float(t) for t in required_times))
    workers = 1 if _IN_WORKER else (threads or thread_count())
    job = _Job(estimator, master_seed, triplet, horizon, required)

    logger.debug("mc run: %d replicates, seed %d, %d workers", n, master_seed, workers)
    if workers == 1:
        values = job.chunk((0, n))
    else:
        edges = np.linspace(0, n, min(workers, n) * CHUNKS_PER_WORKER + 1).astype(int)
        spans = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        if _pool_kind() == "process":
            parts = _forked_chunks(job, spans, workers)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(job.chunk, spans))
        values = np.vstack(parts)
    return [MCEstimate.from_values(values[:, j], master_seed) for j in range(values.shape[1])]



def mc_run(estimator: Callable[[Path], float], n: int, master_seed: int,
           triplet: LevyTriplet, horizon: float, required_times: Iterable[float],
           threads: int | None = None) -> MCEstimate:
    """Mean and standard error of a scalar estimator over n replicates."""
    return mc_run_vector(estimator, n, master_seed, triplet, horizon, required_times, threads)[0]
