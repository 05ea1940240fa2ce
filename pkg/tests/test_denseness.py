import math

import numpy as np
import pytest

from levylab.denseness import (
    CutoffFn,
    Partition,
    SmoothIndicator,
    build_Gn,
    d12_distance_parts,
    d12_distance_sq,
    disjointify,
    dyadic_schedule,
    first_integral,
    grid_check_cutoff,
    grid_check_indicator,
    lemma4_error_terms,
    product_independence_check,
    pure_jump_distance_oracle,
    smoothing_report,
    theorem1_pipeline,
)
from levylab.errors import DomainError, VarianceBudgetError
from levylab.malliavin import Smoothness, d12_norm_sq_mc
from levylab.measures import DensityJumps, LevyTriplet, Rect
from levylab.paths import mc_run
from levylab.random_measure import StepKernel, TensorKernel, bump_profile

PROFILE = bump_profile(1.0, 0.5, 0.7)


def test_partition_validation():
    with pytest.raises(DomainError):
        Partition((0.0,))
    with pytest.raises(DomainError):
        Partition((0.0, 0.5, 0.5, 1.0))
    with pytest.raises(DomainError):
        Partition.uniform(0.0, 1.0, 0)


def test_partition_with_mesh():
    p = Partition.with_mesh(0.0, 1.0, 0.3)
    assert len(p.widths) == 4
    assert p.mesh == pytest.approx(0.25)
    assert p.interval == (0.0, 1.0)
    assert len(Partition.with_mesh(0.0, 1.0, 0.25).widths) == 4


def test_dyadic_schedule():
    assert [len(p.widths) for p in dyadic_schedule(0.0, 1.0, (1, 3))] == [2, 8]


def test_smooth_indicator(triplet):
    ind = SmoothIndicator.build(0.5, 1.5, triplet, 0.1)
    assert ind.width == 0.25
    assert ind.slack == 0.0
    assert ind.inner == (0.75, 1.25)
    assert ind.outer == (0.25, 1.75)
    assert ind(1.0) == pytest.approx(1.0)
    assert ind(0.25) == 0.0 and ind(1.75) == 0.0
    assert grid_check_indicator(ind) <= 1e-12
    assert ind.l2_error_sq(triplet) == pytest.approx(0.0, abs=1e-12)


def test_smooth_indicator_shrinks_around_mass(triplet):
    ind = SmoothIndicator.build(0.9, 2.0, triplet, 0.1)
    assert ind.outer[0] >= 0.9 - 0.1
    assert ind.slack <= 0.1
    assert ind(1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (-1.0, 0.0)])
def test_smooth_indicator_rejects_charged_boundary(triplet, a, b):
    with pytest.raises(DomainError, match="boundary"):
        SmoothIndicator.build(a, b, triplet, 0.1)


def test_smooth_indicator_derivative(triplet):
    ind = SmoothIndicator.build(0.5, 1.5, triplet, 0.1)
    x = np.linspace(0.2, 1.8, 41)
    h = 1e-6
    fd = (ind(x + h) - ind(x - h)) / (2 * h)
    np.testing.assert_allclose(ind.derivative(x), fd, atol=1e-6)


@pytest.mark.parametrize("level", [2.0, 4.0, 8.0])
def test_cutoff_grid_checks(level):
    checks = grid_check_cutoff(CutoffFn(level))
    assert checks["range"] == 0.0
    assert checks["plateau"] == 0.0
    assert checks["support"] == 0.0
    assert checks["slope"] <= 1.0


def test_cutoff_gradient_matches_finite_differences():
    cutoff = CutoffFn(1.0)
    rng = np.random.default_rng(7)
    y = np.cumsum(rng.uniform(-2.5, 2.5, (6, 3)), axis=1)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (cutoff.alpha(y + e) - cutoff.alpha(y - e)) / (2 * h)
        np.testing.assert_allclose(cutoff.grad_alpha(y)[:, k], fd, atol=1e-6)


def test_cutoff_level_positive():
    with pytest.raises(DomainError):
        CutoffFn(0.0)


def test_cutoff_apply_is_compact(quiet_path):
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), quiet_path().triplet)
    cut = CutoffFn(2.0).apply(G)
    assert cut.smoothness is Smoothness.COMPACT_SUPPORT_SMOOTH
    assert len(cut.bbox) == len(cut.times)
    assert cut.value(quiet_path()) == pytest.approx(G.value(quiet_path()))


def test_Gn_on_a_path_without_jumps(quiet_path):
    path = quiet_path()
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), path.triplet)
    # each cell holds exactly one unit jump with probability 0.5 e^{-0.5}; psi(1) = 0.7
    assert G.value(path) == pytest.approx(-1.4 * math.exp(-0.5), rel=1e-12)
    assert G.offset_stderr == 0.0


def test_Gn_is_centered(triplet, seed):
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 8), triplet)
    assert mc_run(G.value, 20000, seed, triplet, 1.0, G.times).agrees_with(0.0)


def test_Gn_density_needs_variance_budget(seed):
    density = LevyTriplet(0.0, 0.5, DensityJumps(lambda x: np.full(np.shape(x), 1.5), 0.5, 1.5))
    with pytest.raises(VarianceBudgetError):
        build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), density, seed, expectation_reps=100,
                 variance_budget=1e-9)
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), density, seed, expectation_reps=2000,
                 variance_budget=1.0)
    assert G.offset_stderr > 0.0


def test_pure_jump_oracle_matches_monte_carlo(pure_jump, seed):
    partition = Partition.uniform(0.0, 1.0, 4)
    value, derivative = pure_jump_distance_oracle(PROFILE, partition, pure_jump)
    G = build_Gn(PROFILE, partition, pure_jump)
    parts = d12_distance_parts(first_integral(PROFILE, 0.0, 1.0), G, pure_jump, 1.0, 20000, seed)
    assert parts["l2"].agrees_with(value)
    assert parts["derivative"].agrees_with(derivative)
    assert parts["zero"].mean == 0.0


def test_pure_jump_oracle_needs_single_atom(triplet):
    with pytest.raises(DomainError):
        pure_jump_distance_oracle(PROFILE, Partition.uniform(0.0, 1.0, 4), triplet)


def test_distance_to_itself(triplet, seed):
    F = first_integral(PROFILE, 0.0, 1.0)
    est = d12_distance_sq(F, F, triplet, 1.0, 50, seed)
    assert est.mean == 0.0


def test_error_terms_without_gaussian_part(pure_jump, seed):
    partition = Partition.uniform(0.0, 1.0, 4)
    terms = lemma4_error_terms(PROFILE, partition, pure_jump, 1.0, 20000, seed)
    _, derivative = pure_jump_distance_oracle(PROFILE, partition, pure_jump)
    assert terms.zero_part.mean == 0.0
    assert terms.jump_part.agrees_with(derivative)
    assert terms.zero_bound > 0.0 and terms.jump_bound > 0.0


def test_error_terms_shrink(triplet, seed):
    coarse = lemma4_error_terms(PROFILE, Partition.uniform(0.0, 1.0, 4), triplet, 1.0, 2000, seed)
    fine = lemma4_error_terms(PROFILE, Partition.uniform(0.0, 1.0, 64), triplet, 1.0, 2000, seed)
    assert fine.zero_part.mean < coarse.zero_part.mean
    assert fine.jump_part.mean < coarse.jump_part.mean


def test_disjointify_two_cells(triplet):
    split = disjointify(triplet, (0.0, 1.0), [(0.5, 1.5), (-1.0, -0.25)], [], 2)
    assert len(split.s1) == 2
    assert split.constant == pytest.approx(1.5)
    assert split.s2_norm == pytest.approx(0.75)


def test_disjointify_single_cell(triplet):
    split = disjointify(triplet, (0.0, 1.0), [(0.5, 1.5), (-1.0, -0.25)], [], 1)
    assert split.s1 == []
    assert split.s2_norm == pytest.approx(1.5)


def test_disjointify_rejects_overlapping_sizes(triplet):
    with pytest.raises(DomainError):
        disjointify(triplet, (0.0, 1.0), [(0.0, 1.0), (0.5, 2.0)], [], 2)


def test_disjointify_rejects_tail_inside_interval(triplet):
    with pytest.raises(DomainError):
        disjointify(triplet, (0.0, 1.0), [(0.5, 1.5)], [((0.5, 2.0), (0.5, 1.5))], 2)


def test_remainder_norm_by_monte_carlo(triplet, seed):
    split = disjointify(triplet, (0.0, 1.0), [(0.5, 1.5), (-1.0, -0.25)], [], 2)
    est = d12_norm_sq_mc(split.remainder(), triplet, 1.0, 20000, seed)
    assert est.agrees_with(split.s2_norm)


@pytest.fixture
def pipeline_target():
    rects = (Rect(0.0, 1.0, 0.5, 1.5), Rect(1.0, 2.0, -1.0, -0.25))
    return TensorKernel(tuple(StepKernel.indicator(r) for r in rects))


def test_pipeline_stage(triplet, seed, pipeline_target):
    result = theorem1_pipeline(pipeline_target, 0.1, 0.25, 4.0, triplet, 2.0, 200, seed)
    assert len(result.factors) == 2
    assert len(result.indicators) == 2
    assert result.smoothing_error <= result.slack_bound + 1e-15
    assert result.smoothing_bound == pytest.approx(6.0 * result.smoothing_error)
    assert result.approximant.smoothness is Smoothness.COMPACT_SUPPORT_SMOOTH
    assert result.distance.mean >= 0.0

    report = product_independence_check(list(result.factors), triplet, 2.0, 10, seed, 20)
    assert report.points == 200
    assert report.max_cross_term == 0.0
    assert report.max_product_rule_error <= 1e-12


def test_pipeline_needs_unit_indicators(triplet, seed):
    target = TensorKernel((StepKernel.indicator(Rect(0.0, 1.0, 0.5, 1.5), 2.0),))
    with pytest.raises(DomainError):
        theorem1_pipeline(target, 0.1, 0.25, 4.0, triplet, 1.0, 10, seed)


def test_independence_needs_two_factors(triplet, seed):
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), triplet)
    with pytest.raises(DomainError):
        product_independence_check([G], triplet, 1.0, 2, seed)
    with pytest.raises(DomainError):
        product_independence_check([G, G], triplet, 1.0, 2, seed)


def test_Gn_counts_isolated_jumps(quiet_path):
    path = quiet_path(jump_times=[0.1, 0.6], jump_sizes=[1.0, 1.0])
    G = build_Gn(PROFILE, Partition.uniform(0.0, 1.0, 4), path.triplet)
    assert G.value(path) == pytest.approx(2 * 0.7 - 1.4 * math.exp(-0.5), rel=1e-12)


def test_smoothing_report_under_a_density(density_triplet):
    rects = [Rect(0.0, 1.0, 0.5, 1.5)]
    indicators = [SmoothIndicator.build(0.5, 1.5, density_triplet, 0.01)]
    error, scaled, bound = smoothing_report(rects, indicators, density_triplet)
    assert 0.0 < error <= bound + 1e-15
    assert scaled == pytest.approx(2.0 * error)
    assert indicators[0].slack <= 0.01


def test_error_terms_under_a_density(density_triplet, seed):
    partition = Partition.uniform(0.0, 1.0, 4)
    profile = SmoothIndicator.build(0.5, 1.5, density_triplet, 0.01).profile
    terms = lemma4_error_terms(profile, partition, density_triplet, 1.0, 400, seed)
    G = build_Gn(profile, partition, density_triplet, seed, expectation_reps=2000,
                 variance_budget=1.0)
    parts = d12_distance_parts(first_integral(profile, 0.0, 1.0), G, density_triplet, 1.0, 400,
                               seed)
    assert terms.zero_part.agrees_with(parts["zero"].mean)
    assert terms.jump_part.agrees_with(parts["jump"].mean)


def test_pipeline_under_a_density(density_triplet, seed, pipeline_target):
    result = theorem1_pipeline(pipeline_target, 0.1, 0.25, 4.0, density_triplet, 2.0, 100, seed,
                               expectation_reps=2000, variance_budget=1.0)
    assert len(result.factors) == 2
    assert result.smoothing_error <= result.slack_bound + 1e-15
    assert result.factors[0].offset_stderr > 0.0
    assert result.distance.mean >= 0.0
