import math

import numpy as np
import pytest

from levylab.errors import QuadratureError
from levylab.quadrature import checked_integrate, composite_nodes, integrate, split_nodes


def test_weights_sum_to_length():
    _, w = composite_nodes(-1.0, 2.5, 7)
    assert w.sum() == pytest.approx(3.5, rel=1e-14)


def test_polynomials_integrate_exactly():
    assert integrate(lambda x: x ** 5, 0.0, 1.0, 1) == pytest.approx(1.0 / 6.0, rel=1e-14)


def test_checked_integrate_smooth():
    assert checked_integrate(np.exp, 0.0, 1.0, 4) == pytest.approx(math.e - 1.0, rel=1e-13)


def test_empty_interval_is_zero():
    assert checked_integrate(np.exp, 1.0, 1.0, 4) == 0.0
    assert composite_nodes(2.0, 1.0, 3)[0].size == 0


def test_discontinuity_is_detected():
    with pytest.raises(QuadratureError):
        checked_integrate(lambda x: np.sign(x - 0.3), 0.0, 1.0, 1)


def test_bad_panel_count():
    with pytest.raises(QuadratureError):
        composite_nodes(0.0, 1.0, 0)


def test_kink_needs_a_break():
    def kink(x):
        return np.abs(x - 0.3)

    with pytest.raises(QuadratureError):
        checked_integrate(kink, 0.0, 1.0, 3)
    exact = (0.3 ** 2 + 0.7 ** 2) / 2.0
    assert checked_integrate(kink, 0.0, 1.0, 3, breaks=(0.3,)) == pytest.approx(exact, rel=1e-13)


def test_split_nodes_cover_each_piece():
    x, w = split_nodes(0.0, 1.0, (0.25, 2.0, -1.0), 4)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert w[x < 0.25].sum() == pytest.approx(0.25, rel=1e-14)
    # breaks outside the interval are ignored
    assert x.min() > 0.0 and x.max() < 1.0
