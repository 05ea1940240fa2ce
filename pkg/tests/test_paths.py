import numpy as np
import pytest

from levylab.errors import DomainError, NonFiniteError
from levylab.paths import (
    MCEstimate,
    derive_seed,
    increment,
    mc_run,
    mc_run_vector,
    simulate_path,
)


def test_path_is_a_function_of_seed_and_index(triplet, seed):
    a = simulate_path(triplet, 3.0, [1.0, 2.0], 7, seed)
    b = simulate_path(triplet, 3.0, [1.0, 2.0], 7, seed)
    c = simulate_path(triplet, 3.0, [1.0, 2.0], 8, seed)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.jump_times, b.jump_times)
    assert not np.array_equal(a.values, c.values)


def test_required_times_are_on_the_grid(triplet, seed):
    path = simulate_path(triplet, 3.0, [0.25, 1.5, 3.0], 0, seed)
    assert path.X([0.0])[0] == 0.0
    assert path.X([0.25, 1.5, 3.0]).shape == (3,)
    with pytest.raises(DomainError):
        path.X([0.3])


def test_required_times_beyond_horizon(triplet, seed):
    with pytest.raises(DomainError):
        simulate_path(triplet, 1.0, [2.0], 0, seed)


def test_path_values_add_up(triplet, seed):
    path = simulate_path(triplet, 3.0, [1.0, 2.0], 3, seed)
    jumps = path.jumps_in(0.0, 2.0)[1].sum()
    expected = triplet.sigma * path.W([2.0])[0] + jumps
    assert path.X([2.0])[0] == pytest.approx(expected, abs=1e-12)
    assert increment(path, 1.0, 2.0) == pytest.approx(path.X([2.0])[0] - path.X([1.0])[0])
    with pytest.raises(DomainError):
        increment(path, 2.0, 1.0)


def test_mean_of_X1(triplet, seed):
    est = mc_run(lambda p: p.X([1.0])[0], 20000, seed, triplet, 1.0, [1.0])
    assert est.agrees_with(triplet.mean())


def test_variance_of_X1(triplet, seed):
    mean = triplet.mean()
    est = mc_run(lambda p: (p.X([1.0])[0] - mean) ** 2, 20000, seed, triplet, 1.0, [1.0])
    assert est.agrees_with(triplet.mu_total())


def test_results_do_not_depend_on_threads(triplet, seed):
    def estimator(path):
        return np.array([path.X([1.0])[0], path.X([2.0])[0] ** 2])

    one = mc_run_vector(estimator, 500, seed, triplet, 3.0, [1.0, 2.0], threads=1)
    many = mc_run_vector(estimator, 500, seed, triplet, 3.0, [1.0, 2.0], threads=4)
    assert [(e.mean, e.stderr) for e in one] == [(e.mean, e.stderr) for e in many]


def test_threads_from_environment(triplet, seed, monkeypatch):
    monkeypatch.setenv("LEVYLAB_THREADS", "1")
    one = mc_run(lambda p: p.X([1.0])[0], 300, seed, triplet, 1.0, [1.0])
    monkeypatch.setenv("LEVYLAB_THREADS", "3")
    three = mc_run(lambda p: p.X([1.0])[0], 300, seed, triplet, 1.0, [1.0])
    assert one == three


def test_non_finite_estimator_reports_replicate(triplet, seed):
    with pytest.raises(NonFiniteError) as info:
        mc_run(lambda p: float("nan"), 10, seed, triplet, 1.0, [])
    assert info.value.replicate_index == 0


@pytest.mark.parametrize("pool", ["process", "thread"])
def test_worker_pools_match_serial(triplet, seed, monkeypatch, pool):
    monkeypatch.setenv("LEVYLAB_POOL", pool)

    def estimator(path):
        return np.array([path.X([1.0])[0], len(path.jump_times)])

    serial = mc_run_vector(estimator, 203, seed, triplet, 2.0, [1.0], threads=1)
    pooled = mc_run_vector(estimator, 203, seed, triplet, 2.0, [1.0], threads=3)
    assert serial == pooled


def test_non_finite_in_a_worker_keeps_the_replicate(triplet, seed):
    with pytest.raises(NonFiniteError) as info:
        mc_run(lambda p: float("nan"), 40, seed, triplet, 1.0, [], threads=2)
    assert info.value.replicate_index is not None


def test_estimates_need_two_replicates(triplet, seed):
    with pytest.raises(DomainError):
        mc_run(lambda p: 0.0, 1, seed, triplet, 1.0, [])
    with pytest.raises(DomainError):
        MCEstimate(0.0, 0.0, 1, seed)


def test_derive_seed_streams(seed):
    assert derive_seed(seed, 1) == derive_seed(seed, 1)
    assert derive_seed(seed, 1) != derive_seed(seed, 2)
    assert 0 <= derive_seed(seed, 1) < 2 ** 64


def test_constant_estimator_has_zero_stderr(triplet, seed):
    est = mc_run(lambda p: 2.5, 50, seed, triplet, 1.0, [])
    assert est.mean == 2.5
    assert est.stderr == 0.0


def test_increment_bookkeeping(quiet_path):
    path = quiet_path(grid=[0.0, 0.6, 1.0], jump_times=[0.5], jump_sizes=[1.0])
    assert increment(path, 0.0, 1.0) == 1.0
    assert increment(path, 0.6, 1.0) == 0.0
    assert increment(path, 0.0, 0.6) + increment(path, 0.6, 1.0) == increment(path, 0.0, 1.0)
    with pytest.raises(DomainError):
        increment(path, 1.0, 1.0)
    with pytest.raises(DomainError):
        increment(path, 0.0, 0.5)


def test_jump_count_is_poisson(pure_jump, seed):
    est = mc_run(lambda p: p.jump_times.size, 20000, seed, pure_jump, 1.0, [])
    assert est.agrees_with(2.0)


def test_increments_are_uncorrelated(triplet, seed):
    mean = triplet.mean()
    est = mc_run(lambda p: (increment(p, 0.0, 1.0) - mean) * (increment(p, 1.0, 2.0) - mean),
                 20000, seed, triplet, 2.0, [1.0])
    assert est.agrees_with(0.0)
