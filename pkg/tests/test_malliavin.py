from dataclasses import replace

import numpy as np
import pytest

from levylab.errors import BoundViolationError, DomainError, QuadratureError
from levylab.malliavin import (
    ChaosFunctional,
    LinearCombination,
    LipschitzFn,
    RectProduct,
    SmoothFunctional,
    Smoothness,
    chain_rule_jump,
    chain_rule_zero,
    compose,
    d12_components,
    d12_norm_sq_mc,
    d12_parts_mc,
    difference,
    eval_D,
    mollify,
    product,
    product_rule_check,
    tensor_bump_functional,
)
from levylab.measures import Flavor, Rect, m_measure
from levylab.paths import Path, simulate_path
from levylab.random_measure import StepKernel, TensorKernel

XS = np.array([0.0, 1.0, -0.5, 2.5])


def identity(t=1.0):
    return SmoothFunctional((t,), lambda y: y[..., 0], lambda y: np.ones_like(y))


def square(t=1.0):
    return SmoothFunctional((t,), lambda y: y[..., 0] ** 2, lambda y: 2.0 * y)


@pytest.fixture
def path(triplet, seed):
    return simulate_path(triplet, 2.0, [1.0, 2.0], 3, seed)


def test_identity_derivative(path):
    F = identity()
    np.testing.assert_allclose(F.derivative(path, 0.5, XS), 1.0)
    np.testing.assert_allclose(F.derivative(path, 1.0, XS), 1.0)
    assert not F.derivative(path, 1.5, XS).any()


def test_square_derivative(path):
    F = square()
    x1 = path.X([1.0])[0]
    assert eval_D(F, path, 0.5, 0.0) == pytest.approx(2.0 * x1)
    assert eval_D(F, path, 0.5, 1.0) == pytest.approx(2.0 * x1 + 1.0)
    assert eval_D(F, path, 0.5, -0.5) == pytest.approx(2.0 * x1 - 0.5)


def test_negative_time_rejected(path):
    with pytest.raises(DomainError):
        eval_D(identity(), path, -0.1, 0.0)


def test_wrong_gradient_rejected():
    with pytest.raises(DomainError, match="finite differences"):
        SmoothFunctional((1.0,), lambda y: y[..., 0] ** 2, lambda y: np.ones_like(y))


def test_compact_support_needs_bbox():
    with pytest.raises(DomainError):
        SmoothFunctional((1.0,), lambda y: y[..., 0], lambda y: np.ones_like(y),
                         Smoothness.COMPACT_SUPPORT_SMOOTH)


def test_times_must_be_ordered():
    with pytest.raises(DomainError):
        SmoothFunctional((2.0, 1.0), lambda y: y[..., 0], lambda y: np.ones_like(y))


def test_derivative_is_piecewise_constant(path):
    F = SmoothFunctional((1.0, 2.0), lambda y: y[..., 0] * y[..., 1],
                         lambda y: np.stack([y[..., 1], y[..., 0]], axis=-1))
    x1, x2 = path.X([1.0, 2.0])
    assert eval_D(F, path, 0.3, 0.0) == pytest.approx(x1 + x2)
    assert eval_D(F, path, 0.7, 0.0) == eval_D(F, path, 0.3, 0.0)
    assert eval_D(F, path, 1.5, 0.0) == pytest.approx(x1)
    assert eval_D(F, path, 1.5, 2.0) == pytest.approx(x1)


def test_shift_invariant_increment(path):
    F = SmoothFunctional((1.0, 2.0), lambda y: y[..., 1] - y[..., 0],
                         lambda y: np.stack([-np.ones(y.shape[:-1]), np.ones(y.shape[:-1])], -1),
                         shift_invariant=True)
    assert not F.derivative(path, 0.5, XS).any()
    np.testing.assert_allclose(F.derivative(path, 1.5, XS), 1.0)


def test_rect_product_matches_chaos_functional(path):
    b1, b2 = Rect(0.0, 1.0, 0.5, 1.5), Rect(1.0, 2.0, -1.0, -0.25)
    rp = RectProduct((b1, b2), 2.0)
    cf = ChaosFunctional(TensorKernel((StepKernel.indicator(b1), StepKernel.indicator(b2))), 2.0)
    assert rp.value(path) == pytest.approx(cf.value(path))
    for t in (0.5, 1.5):
        np.testing.assert_allclose(rp.derivative(path, t, XS), cf.derivative(path, t, XS))


def test_rect_product_needs_disjoint_rects():
    with pytest.raises(DomainError):
        RectProduct((Rect(0.0, 1.0, 0.0, 1.0), Rect(0.5, 1.5, 0.5, 2.0)))


def test_smooth_and_random_measure_derivatives_agree(triplet, path):
    rect = Rect(0.0, 1.0, -10.0, 10.0)
    shift = triplet.mean()
    F = SmoothFunctional((1.0,), lambda y: y[..., 0] - shift, lambda y: np.ones_like(y))
    G = RectProduct((rect,))
    assert F.value(path) == pytest.approx(G.value(path))
    for t in (0.25, 1.0):
        np.testing.assert_allclose(F.derivative(path, t, XS), G.derivative(path, t, XS))


def test_linear_combination(path):
    F, G = identity(), square()
    H = LinearCombination(((2.0, F), (-1.0, G)), constant=1.0)
    x1 = path.X([1.0])[0]
    assert H.value(path) == pytest.approx(1.0 + 2.0 * x1 - x1 ** 2)
    assert eval_D(H, path, 0.5, 1.0) == pytest.approx(2.0 - (2.0 * x1 + 1.0))
    assert difference(F, F).value(path) == 0.0


def test_offset_stderr_propagates():
    F = SmoothFunctional((1.0,), lambda y: y[..., 0], lambda y: np.ones_like(y),
                         offset_stderr=0.1)
    assert LinearCombination(((2.0, F), (1.0, identity()))).offset_stderr == pytest.approx(0.2)


def test_product_rule(path):
    F, G = identity(), square()
    for t in (0.2, 0.9):
        for x in (0.0, 1.0, -0.5):
            lhs, rhs = product_rule_check(F, G, path, t, x)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_product_of_same_functional(path):
    F = identity()
    x1 = path.X([1.0])[0]
    assert eval_D(product(F, F), path, 0.5, 1.0) == pytest.approx(2.0 * x1 + 1.0)


def test_chain_rule(path):
    g = LipschitzFn(np.sin, 1.0, np.cos)
    F = identity()
    x1 = path.X([1.0])[0]
    assert chain_rule_zero(g, F, path, 0.5) == pytest.approx(np.cos(x1))
    q = chain_rule_jump(g, F, path, 0.5, 1.0)
    assert q == pytest.approx(np.sin(x1 + 1.0) - np.sin(x1))
    assert abs(q) <= 1.0
    assert eval_D(compose(g, F), path, 0.5, 0.0) == pytest.approx(chain_rule_zero(g, F, path, 0.5))


def test_chain_rule_jump_needs_nonzero_size(path):
    with pytest.raises(DomainError):
        chain_rule_jump(LipschitzFn(np.sin, 1.0, np.cos), identity(), path, 0.5, 0.0)


def test_chain_rule_zero_checks_declared_derivative(quiet_path):
    g = LipschitzFn(np.sin, 1.0, lambda y: 2.0 * np.cos(y))
    with pytest.raises(BoundViolationError):
        chain_rule_zero(g, identity(), quiet_path(), 0.5)


def test_lipschitz_constant_is_checked():
    with pytest.raises(DomainError):
        LipschitzFn(np.square, 1.0)
    with pytest.raises(DomainError):
        LipschitzFn(np.abs, -1.0)


def test_mollify_bounds():
    g = LipschitzFn(np.abs, 1.0)
    grid = np.linspace(-3.0, 3.0, 601)
    for N in (1, 4, 16):
        gN = mollify(g, N)
        assert np.max(np.abs(gN(grid) - g(grid))) <= 1.0 / N
        assert np.max(np.abs(gN.derivative(grid))) <= 1.0 + 1e-6
    with pytest.raises(DomainError):
        mollify(g, 0)


def test_mollified_abs_is_smooth_at_zero():
    gN = mollify(LipschitzFn(np.abs, 1.0), 8)
    assert gN.derivative(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)
    assert gN.derivative(np.array([1.0]))[0] == pytest.approx(1.0)


def test_identity_d12_components(triplet, path):
    l2, zero, jump = d12_components(identity(), path)
    assert l2 == pytest.approx(path.X([1.0])[0] ** 2)
    assert zero == pytest.approx(1.0)
    assert jump == pytest.approx(2.25)


def test_identity_d12_parts(triplet, seed):
    parts = d12_parts_mc(identity(), triplet, 1.0, 20000, seed)
    assert parts["derivative"].mean == pytest.approx(triplet.mu_total())
    assert parts["derivative"].stderr == pytest.approx(0.0, abs=1e-12)
    assert parts["l2"].agrees_with(triplet.mu_total() + triplet.mean() ** 2)
    full = parts["full"]
    assert full.mean == pytest.approx(parts["zero_flavor"].mean + parts["jump_flavor"].mean
                                      - parts["l2"].mean)


def test_constant_functional_norm(triplet, seed):
    F = SmoothFunctional((1.0,), lambda y: np.full(np.shape(y)[:-1], 2.0),
                         lambda y: np.zeros_like(y))
    est = d12_norm_sq_mc(F, triplet, 1.0, 100, seed)
    assert est.mean == pytest.approx(4.0)
    assert d12_norm_sq_mc(F, triplet, 1.0, 100, seed, Flavor.JUMP_PART).mean == pytest.approx(4.0)


def test_norm_needs_horizon(triplet, seed):
    with pytest.raises(DomainError):
        d12_parts_mc(identity(2.0), triplet, 1.0, 10, seed)


def test_tensor_bump_functional(quiet_path):
    F = tensor_bump_functional((0.5, 1.0), (0.0, 0.0), (1.0, 2.0), 0.7)
    path = quiet_path()
    assert F.value(path) == pytest.approx(0.7)
    assert eval_D(F, path, 0.25, 0.0) == pytest.approx(0.0)
    # shifting both coordinates by 1: (1 - s(1)) (1 - s(1/2)) = 0
    assert eval_D(F, path, 0.25, 1.0) == pytest.approx(-0.7)


def test_trivial_chain_rules(path):
    F = identity()
    ident = LipschitzFn(lambda y: y, 1.0, np.ones_like)
    const = LipschitzFn(lambda y: np.full_like(y, 3.0), 0.0, np.zeros_like)
    assert chain_rule_jump(ident, F, path, 0.5, -0.5) == pytest.approx(1.0)
    assert chain_rule_zero(ident, F, path, 0.5) == pytest.approx(1.0)
    assert chain_rule_jump(const, F, path, 0.5, 1.0) == 0.0
    assert chain_rule_zero(const, F, path, 0.5) == 0.0


def test_d12_of_a_rectangle_under_a_density(density_triplet, seed):
    B = Rect(0.0, 1.0, 0.25, 0.75)
    F = RectProduct((B,))
    path = simulate_path(density_triplet, 1.0, F.times, 0, seed)
    l2, zero, jump = d12_components(F, path)
    assert l2 == pytest.approx(F.value(path) ** 2)
    assert zero == 0.0
    # the derivative part of M(B) is deterministic: m(B)
    assert jump == pytest.approx(m_measure(density_triplet, B), rel=1e-10)


def test_d12_norm_under_a_density(density_triplet, seed):
    B = Rect(0.0, 1.0, 0.25, 0.75)
    est = d12_norm_sq_mc(RectProduct((B,)), density_triplet, 1.0, 4000, seed)
    assert est.agrees_with(2.0 * m_measure(density_triplet, B))


def test_declared_kinks_split_the_size_axis(density_triplet):
    # X stays at 0, so the bump kinks sit at x = -1, 0, 1
    path = Path(1.0, np.array([0.0, 1.0]), np.zeros(2), np.empty(0), np.empty(0),
                density_triplet)
    F = tensor_bump_functional((1.0,), (0.0,), (1.0,))
    _, _, jump = d12_components(F, path)

    def integrand(x):
        u = np.minimum(np.abs(x), 1.0)
        return (u * u * (3.0 - 2.0 * u)) ** 2

    expected = density_triplet.nu.integrate(integrand, breaks=(1.0,))
    assert jump == pytest.approx(expected, rel=1e-10)
    assert F.size_breakpoints(path, 0.5) == (-1.0, 0.0, 1.0)


def test_undeclared_size_jump_is_caught(density_triplet):
    path = Path(1.0, np.array([0.0, 1.0]), np.zeros(2), np.empty(0), np.empty(0),
                density_triplet)
    F = SmoothFunctional((1.0,), lambda y: np.where(y[..., 0] > 1.31, 1.0, 0.0),
                         lambda y: np.zeros_like(y), check_gradient=False,
                         kinks=lambda y, active: 1.31 - y[active])
    _, _, jump = d12_components(F, path)
    expected = density_triplet.nu.integrate(np.ones_like, lo=1.31)
    assert jump == pytest.approx(expected, rel=1e-10)
    with pytest.raises(QuadratureError):
        d12_components(replace(F, kinks=None), path)
