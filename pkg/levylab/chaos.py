"""Exact chaos moments and D_{1,2} norms of indicator-tensor chaos elements.

An ElementaryChaos c I_n(1_{B_1 x ... x B_n}) has

    E[I_n(f) I_n(g)] = n! <f~, g~> = c c' sum_pi prod_i m(B_i n B'_pi(i)),

the permanent of the rectangle-intersection Gram matrix.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .measures import Flavor, LevyTriplet, Rect, m_intersection, m_measure, mu_measure
from .random_measure import StepKernel, TensorKernel

MAX_ORDER = 12
MAX_BRUTEFORCE_ORDER = 6
MAX_ENUMERATION = 10 ** 6


@dataclass(frozen=True)
class ElementaryChaos:
    """c I_n(1_{B_1 x ... x B_n}); the rectangles need not be disjoint."""

    rects: tuple[Rect, ...]
    coefficient: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))
        if not self.rects:
            raise DomainError("an elementary chaos needs order >= 1")

    @property
    def order(self) -> int:
        return len(self.rects)


@dataclass(frozen=True)
class ChaosSum:
    """constant + sum of elementary chaos terms of possibly mixed order."""

    terms: tuple[ElementaryChaos, ...]
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


def permanent(a: np.ndarray) -> float:
    """Permanent by Ryser's inclusion-exclusion formula with Gray-code updates."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DomainError("permanent needs a square matrix")
    if n == 0:
        return 1.0
    if n > MAX_ORDER:
        raise EnumerationLimitError(f"order {n} exceeds the permanent limit {MAX_ORDER}")
    row_sums = np.zeros(n)
    total = 0.0
    subset = 0
    for k in range(1, 2 ** n):
        # flip the column given by the lowest set bit of k
        col = (k & -k).bit_length() - 1
        subset ^= 1 << col
        if subset >> col & 1:
            row_sums += a[:, col]
        else:
            row_sums -= a[:, col]
        size = bin(subset).count("1")
        total += (-1) ** size * math.prod(row_sums)
    return (-1) ** n * total


def gram(triplet: LevyTriplet, e1: ElementaryChaos, e2: ElementaryChaos,
         flavor: Flavor = Flavor.FULL) -> np.ndarray:
    """Matrix of m(B_i n B'_j) restricted to the flavor's part of the size axis."""
    return np.array([[m_intersection(triplet, a, b, flavor) for b in e2.rects] for a in e1.rects])


def inner_product(triplet: LevyTriplet, e1: ElementaryChaos, e2: ElementaryChaos) -> float:
    """E[e1 e2]; zero across orders."""
    if e1.order != e2.order:
        return 0.0
    if e1.order > MAX_ORDER:
        raise EnumerationLimitError(f"order {e1.order} exceeds {MAX_ORDER}")
    return e1.coefficient * e2.coefficient * permanent(gram(triplet, e1, e2))


def restricted_inner_product(triplet: LevyTriplet, e1: ElementaryChaos, e2: ElementaryChaos,
                             flavor: Flavor) -> float:
    """n n! <f~ 1_R, g~ 1_R> with R = (restricted part) x (R_+ x R)^{n-1}.

    Restricting one coordinate of the symmetrized kernels sums, over the rows
    k, permanents whose k-th row uses the restricted measure.
    """
    if e1.order != e2.order:
        return 0.0
    full = gram(triplet, e1, e2)
    part = gram(triplet, e1, e2, flavor)
    total = 0.0
    for k in range(e1.order):
        g = full.copy()
        g[k] = part[k]
        total += permanent(g)
    return e1.coefficient * e2.coefficient * total


def restricted_inner_product_bruteforce(triplet: LevyTriplet, e1: ElementaryChaos,
                                        e2: ElementaryChaos, flavor: Flavor,
                                        coordinate: int = 0) -> float:
    """The restricted product by explicit double symmetrization over permutations."""
    n = e1.order
    if n != e2.order:
        return 0.0
    if n > MAX_BRUTEFORCE_ORDER:
        raise EnumerationLimitError(f"order {n} too large for explicit symmetrization")
    if not 0 <= coordinate < n:
        raise DomainError(f"coordinate {coordinate} outside 0..{n - 1}")
    full = gram(triplet, e1, e2)
    part = gram(triplet, e1, e2, flavor)
    total = 0.0
    perms = list(itertools.permutations(range(n)))
    for p in perms:
        for q in perms:
            total += math.prod(
                (part if i == coordinate else full)[p[i], q[i]] for i in range(n)
            )
    # n n! * (1 / n!^2) * double sum
    return e1.coefficient * e2.coefficient * n * total / math.factorial(n)


def _pairs(s: ChaosSum):
    for e1 in s.terms:
        for e2 in s.terms:
            if e1.order == e2.order:
                yield e1, e2


def l2_norm_sq(triplet: LevyTriplet, s: ChaosSum) -> float:
    """E[F^2] for F = s."""
    return s.constant ** 2 + sum(inner_product(triplet, a, b) for a, b in _pairs(s))


def d12_norm_sq(triplet: LevyTriplet, s: ChaosSum, flavor: Flavor = Flavor.FULL) -> float:
    """||F||^2 in D_{1,2}, or the D^0 / D^J norms for the restricted flavors."""
    if flavor is Flavor.FULL:
        return s.constant ** 2 + sum(
            (a.order + 1) * inner_product(triplet, a, b) for a, b in _pairs(s)
        )
    return l2_norm_sq(triplet, s) + sum(
        restricted_inner_product(triplet, a, b, flavor) for a, b in _pairs(s)
    )


def chaos_of_tensor(tk: TensorKernel) -> ChaosSum:
    """Expand a tensor of step kernels into indicator-tensor chaos terms."""
    if not all(isinstance(k, StepKernel) for k in tk.factors):
        raise DomainError("only step-kernel tensors expand into indicator chaos")
    terms = []
    for choice in itertools.product(*(k.terms for k in tk.factors)):
        coefficient = math.prod(c for c, _ in choice)
        terms.append(ElementaryChaos(tuple(r for _, r in choice), coefficient))
    return ChaosSum(tuple(terms))


def s2_norm_formula(m: int, N: int, T_len: float, c: float) -> float:
    """c |T|^m (1 - (1 - 1/N)(1 - 2/N)...(1 - (m-1)/N)).

    Squared D_{1,2} norm of the non-distinct part S_2 after splitting T into
    N equal cells; m = 1 gives 0 by the empty-product convention.
    """
    if m < 1 or N < 1:
        raise DomainError(f"need m >= 1 and N >= 1, got m={m}, N={N}")
    if m > N:
        raise DomainError(f"need m <= N, got m={m}, N={N}")
    # 1 - prod(1 - k/N) without cancelling for large N
    non_distinct = -math.expm1(math.fsum(math.log1p(-k / N) for k in range(1, m)))
    return c * T_len ** m * non_distinct


def equal_cells(t_lo: float, t_hi: float, N: int) -> list[tuple[float, float]]:
    """N equal cells of (t_lo, t_hi]."""
    edges = np.linspace(t_lo, t_hi, N + 1)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def s2_norm_direct(triplet: LevyTriplet, T: tuple[float, float],
                   a_list: list[tuple[float, float]],
                   tail: list[tuple[tuple[float, float], tuple[float, float]]],
                   N: int) -> float:
    """(n+1) sum over non-distinct cell tuples of prod m(E_j x A_i) prod m(T_k x A_k).

    Enumerates all N^m tuples; m > N is allowed (every tuple is non-distinct).
    """
    m = len(a_list)
    n = m + len(tail)
    if N ** m > MAX_ENUMERATION:
        raise EnumerationLimitError(f"N^m = {N ** m} exceeds {MAX_ENUMERATION}")
    # every cell has length |T| / N
    h = (T[1] - T[0]) / N
    table = np.array([
        [h * mu_measure(triplet, a_lo, a_hi)] * N for a_lo, a_hi in a_list
    ])
    tail_factor = math.prod(
        m_measure(triplet, Rect(t_lo, t_hi, a_lo, a_hi)) for (t_lo, t_hi), (a_lo, a_hi) in tail
    )
    tuples = np.indices((N,) * m).reshape(m, -1)
    ordered = np.sort(tuples, axis=0)
    repeated = np.any(np.diff(ordered, axis=0) == 0, axis=0) if m > 1 else np.zeros(N, bool)
    products = np.prod(table[np.arange(m)[:, None], tuples[:, repeated]], axis=0) * tail_factor
    return (n + 1) * math.fsum(products.tolist())
