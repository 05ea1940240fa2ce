import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from levylab.chaos import (
    ChaosSum,
    ElementaryChaos,
    chaos_of_tensor,
    d12_norm_sq,
    equal_cells,
    inner_product,
    l2_norm_sq,
    permanent,
    restricted_inner_product,
    restricted_inner_product_bruteforce,
    s2_norm_direct,
    s2_norm_formula,
)
from levylab.errors import DomainError, EnumerationLimitError
from levylab.measures import AtomicJumps, Flavor, LevyTriplet, Rect, m_measure
from levylab.random_measure import StepKernel, TensorKernel

TRIPLET = LevyTriplet(0.0, 1.0, AtomicJumps.of((1.0, 2.0), (-0.5, 1.0)))
SIZES = [(0.5, 1.5), (-1.0, -0.25), (-0.25, 0.25)]

B1 = Rect(0.0, 1.0, 0.5, 1.5)
B2 = Rect(1.0, 2.0, -1.0, -0.25)
B3 = Rect(0.5, 1.5, -1.0, 1.5)


def permanent_by_permutations(a):
    n = a.shape[0]
    return sum(math.prod(a[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


rects = st.builds(
    lambda t, dt, x, dx: Rect(t, t + dt, x, x + dx),
    st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0]),
    st.sampled_from([0.5, 1.0]),
    st.sampled_from([-1.0, -0.25, 0.5]),
    st.sampled_from([0.5, 1.0, 1.5]),
)
elements = st.builds(
    ElementaryChaos,
    st.lists(rects, min_size=1, max_size=3).map(tuple),
    st.floats(-2.0, 2.0, allow_nan=False),
)
chaos_sums = st.builds(
    ChaosSum,
    st.lists(elements, min_size=1, max_size=3).map(tuple),
    st.floats(-1.0, 1.0, allow_nan=False),
)


def test_small_permanents():
    assert permanent(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(10.0)
    assert permanent(np.ones((3, 3))) == pytest.approx(6.0)
    assert permanent(np.eye(4)) == pytest.approx(1.0)
    assert permanent(np.zeros((0, 0))) == 1.0


def test_permanent_needs_square():
    with pytest.raises(DomainError):
        permanent(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5)).map(lambda s: (s[0], s[0])),
              elements=st.floats(-2.0, 2.0)))
def test_permanent_matches_permutation_sum(a):
    assert permanent(a) == pytest.approx(permanent_by_permutations(a), rel=1e-9, abs=1e-9)


def test_orders_are_orthogonal():
    assert inner_product(TRIPLET, ElementaryChaos((B1,)), ElementaryChaos((B1, B2))) == 0.0


def test_disjoint_rectangles_are_orthogonal():
    assert inner_product(TRIPLET, ElementaryChaos((B1,)), ElementaryChaos((B2,))) == 0.0


def test_second_order_of_disjoint_times():
    e = ElementaryChaos((B1, B2), 3.0)
    expected = 9.0 * m_measure(TRIPLET, B1) * m_measure(TRIPLET, B2)
    assert inner_product(TRIPLET, e, e) == pytest.approx(expected)
    assert l2_norm_sq(TRIPLET, ChaosSum((e,), 0.5)) == pytest.approx(expected + 0.25)


def test_first_order_d12_norm():
    e = ElementaryChaos((B3,), -1.5)
    assert d12_norm_sq(TRIPLET, ChaosSum((e,))) == pytest.approx(2 * 2.25 * m_measure(TRIPLET, B3))


@settings(max_examples=60, deadline=None)
@given(chaos_sums)
def test_flavors_add_up(s):
    full = d12_norm_sq(TRIPLET, s)
    zero = d12_norm_sq(TRIPLET, s, Flavor.ZERO_PART)
    jump = d12_norm_sq(TRIPLET, s, Flavor.JUMP_PART)
    l2 = l2_norm_sq(TRIPLET, s)
    assert full == pytest.approx(zero + jump - l2, rel=1e-9, abs=1e-12)
    assert l2 <= full * (1.0 + 1e-9) + 1e-9


@pytest.mark.parametrize("flavor", [Flavor.ZERO_PART, Flavor.JUMP_PART])
def test_restricted_product_matches_symmetrization(flavor):
    e1 = ElementaryChaos((B1, B3, B2), 0.5)
    e2 = ElementaryChaos((B3, B2, Rect(0.0, 2.0, -0.25, 1.5)), -2.0)
    fast = restricted_inner_product(TRIPLET, e1, e2, flavor)
    for coordinate in (0, 2):
        brute = restricted_inner_product_bruteforce(TRIPLET, e1, e2, flavor, coordinate)
        assert brute == pytest.approx(fast, rel=1e-12)


def test_bruteforce_rejects_bad_coordinate():
    e = ElementaryChaos((B1, B2))
    with pytest.raises(DomainError):
        restricted_inner_product_bruteforce(TRIPLET, e, e, Flavor.ZERO_PART, 2)


def test_s2_formula_values():
    assert s2_norm_formula(1, 5, 1.0, 3.0) == 0.0
    assert s2_norm_formula(2, 2, 1.0, 1.0) == pytest.approx(0.5)
    assert s2_norm_formula(2, 4, 2.0, 1.0) == pytest.approx(4.0 * 0.25)
    assert s2_norm_formula(3, 4, 1.0, 2.0) == pytest.approx(1.25)


def test_s2_formula_domain():
    with pytest.raises(DomainError):
        s2_norm_formula(3, 2, 1.0, 1.0)
    with pytest.raises(DomainError):
        s2_norm_formula(0, 2, 1.0, 1.0)


@pytest.mark.parametrize("m,N", [(2, 2), (2, 8), (3, 4)])
def test_s2_direct_matches_formula(m, N):
    a_list = SIZES[:m]
    c = (m + 1) * math.prod(m_measure(TRIPLET, Rect(0.0, 1.0, *a)) for a in a_list)
    direct = s2_norm_direct(TRIPLET, (0.0, 1.0), a_list, [], N)
    assert direct == pytest.approx(s2_norm_formula(m, N, 1.0, c), rel=1e-14)


def test_s2_direct_single_cell():
    # every tuple repeats a cell: 3 * mu(A_1) mu(A_2)
    assert s2_norm_direct(TRIPLET, (0.0, 1.0), SIZES[:2], [], 1) == pytest.approx(1.5)


def test_s2_direct_with_tail():
    tail = [((1.0, 3.0), (0.5, 1.5))]
    plain = s2_norm_direct(TRIPLET, (0.0, 1.0), SIZES[:2], [], 4)
    with_tail = s2_norm_direct(TRIPLET, (0.0, 1.0), SIZES[:2], tail, 4)
    assert with_tail == pytest.approx(plain * 4.0 / 3.0 * 4.0)


def test_s2_direct_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        s2_norm_direct(TRIPLET, (0.0, 1.0), SIZES[:2], [], 1001)


def test_equal_cells():
    assert equal_cells(0.0, 1.0, 4) == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]


def test_chaos_of_tensor():
    first = StepKernel(((2.0, B1), (-1.0, Rect(0.0, 1.0, -1.0, -0.25))))
    tk = TensorKernel((first, StepKernel.indicator(B2)))
    s = chaos_of_tensor(tk)
    assert [e.coefficient for e in s.terms] == [2.0, -1.0]
    assert all(e.order == 2 for e in s.terms)
    expected = first.norm_sq(TRIPLET) * m_measure(TRIPLET, B2)
    assert l2_norm_sq(TRIPLET, s) == pytest.approx(expected)


def test_second_order_d12_norm_of_disjoint_rects():
    s = ChaosSum((ElementaryChaos((B1, B2)),))
    expected = 3.0 * m_measure(TRIPLET, B1) * m_measure(TRIPLET, B2)
    assert d12_norm_sq(TRIPLET, s) == pytest.approx(expected)
