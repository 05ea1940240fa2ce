"""Composite Gauss-Legendre quadrature."""
import math
from functools import lru_cache

import numpy as np

from .errors import QuadratureError
from .log import get_logger

logger = get_logger(__name__)

DEFAULT_ORDER = 8
PANEL_RTOL = 1e-10


@lru_cache(maxsize=32)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_nodes(a: float, b: float, panels: int,
                    order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on [a, b] with equal panels."""
    if panels < 1:
        raise QuadratureError(f"panel count must be positive, got {panels}")
    if not b > a:
        return np.empty(0), np.empty(0)
    ref_x, ref_w = _reference_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    w = (half[:, None] * ref_w[None, :]).ravel()
    return x, w


def integrate(fn, a: float, b: float, panels: int, order: int = DEFAULT_ORDER) -> float:
    """Integrate a vectorized function over [a, b]."""
    x, w = composite_nodes(a, b, panels, order)
    if x.size == 0:
        return 0.0
    return float(np.dot(w, np.asarray(fn(x), dtype=float)))


def check_doubling(coarse: float, fine: float, magnitude: float, where: str,
                   rtol: float = PANEL_RTOL):
    """Raise QuadratureError unless the P and 2P panel values agree to rtol.

    ``magnitude`` is the 2P integral of |integrand|; integrals that vanish by
    cancellation are compared against a small multiple of it.
    """
    if not (np.isfinite(coarse) and np.isfinite(fine)):
        raise QuadratureError(f"non-finite integral on {where}")
    scale = max(abs(fine), magnitude * 1e-6)
    if abs(fine - coarse) > rtol * scale:
        raise QuadratureError(f"panel doubling changed the integral on {where}: "
                              f"{coarse!r} vs {fine!r}")


def split_nodes(a: float, b: float, breaks, panels: int,
                order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Composite nodes on [a, b] cut at the interior breaks.

    Each piece gets a share of the panels proportional to its length, at least one.
    """
    if not b > a:
        return np.empty(0), np.empty(0)
    cuts = np.unique(np.concatenate([[a, b], [c for c in breaks if a < c < b]]))
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        share = max(1, math.ceil(panels * (hi - lo) / (b - a)))
        x, w = composite_nodes(float(lo), float(hi), share, order)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def checked_integrate(fn, a: float, b: float, panels: int, order: int = DEFAULT_ORDER,
                      rtol: float = PANEL_RTOL, breaks=()) -> float:
    """Integrate with P and 2P panels and require agreement to rtol.

    The interval is cut at ``breaks`` first, so integrands that are smooth
    between them still converge fast. Returns the 2P value. A non-finite result
    or a disagreement beyond rtol raises QuadratureError.
    """
    if not b > a:
        return 0.0
    x, w = split_nodes(a, b, breaks, panels, order)
    coarse = float(np.dot(w, np.asarray(fn(x), dtype=float)))
    x, w = split_nodes(a, b, breaks, 2 * panels, order)
    values = np.asarray(fn(x), dtype=float)
    fine = float(np.dot(w, values))
    check_doubling(coarse, fine, float(np.dot(w, np.abs(values))), f"[{a}, {b}]", rtol)
    logger.debug("quadrature on [%s, %s] with %d panels: %r", a, b, 2 * panels, fine)
    return fine
