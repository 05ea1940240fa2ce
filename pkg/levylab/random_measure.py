"""The random measure M, first integrals I_1 and elementary multiple integrals.

M(B) = sigma int 1_B(t, 0) dW_t + int_B x dN~(t, x) with the compensated jump
measure N~ = N - dt dnu. Finite activity makes the jump sum finite, so no
epsilon-truncation limit is needed.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError
from .measures import LevyTriplet, Rect, jump_first_moment, m_measure
from .paths import Path


@dataclass(frozen=True)
class Profile:
    """Profile phi of a separable kernel, with declared sup-norms of phi and phi'.

    ``knots`` lists points where phi is less smooth than C-infinity; integrals
    of phi are split there.
    """

    fn: Callable
    dfn: Callable
    support: tuple[float, float]
    sup: float
    dsup: float
    knots: tuple[float, ...] = ()

    def __call__(self, x):
        return self.fn(x)

    @property
    def breaks(self) -> tuple[float, ...]:
        """Support ends and knots, where nu-integrals of phi are split."""
        return tuple(sorted({*self.support, *self.knots}))

    @property
    def reach(self) -> float:
        """max |x| over the support."""
        return max(abs(self.support[0]), abs(self.support[1]))

    def psi_bounds(self) -> tuple[float, float]:
        """Upper bounds of ||psi||_inf and ||psi'||_inf for psi(x) = x phi(x)."""
        return self.reach * self.sup, self.sup + self.reach * self.dsup


def bump_profile(center: float, half_width: float, height: float = 1.0) -> Profile:
    """C-infinity bump height * exp(1 - 1/(1 - u^2)), u = (x - center) / half_width."""
    if half_width <= 0.0:
        raise DomainError("bump half width must be positive")

    def fn(x):
        u = (np.asarray(x, dtype=float) - center) / half_width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out if out.ndim else float(out)

    def dfn(x):
        u = (np.asarray(x, dtype=float) - center) / half_width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = (height * np.exp(1.0 - 1.0 / (1.0 - ui ** 2))
                       * (-2.0 * ui / (1.0 - ui ** 2) ** 2) / half_width)
        return out if out.ndim else float(out)

    grid = np.linspace(center - half_width, center + half_width, 20001)
    dsup = float(np.max(np.abs(dfn(grid)))) * 1.01
    return Profile(fn, dfn, (center - half_width, center + half_width), abs(height), dsup)


@dataclass(frozen=True)
class StepKernel:
    """sum_k c_k 1_{rect_k} with pairwise disjoint rectangles."""

    terms: tuple[tuple[float, Rect], ...]

    def __post_init__(self):
        terms = tuple((float(c), r) for c, r in self.terms)
        object.__setattr__(self, "terms", terms)
        for i, (_, a) in enumerate(terms):
            for _, b in terms[i + 1:]:
                if not a.disjoint(b):
                    raise DomainError(f"step kernel rectangles overlap: {a} and {b}")

    @classmethod
    def indicator(cls, rect: Rect, coefficient: float = 1.0) -> "StepKernel":
        return cls(((coefficient, rect),))

    def value(self, t: float, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, r in self.terms:
            out = out + c * r.contains(t, x)
        return out

    def time_intervals(self) -> list[tuple[float, float]]:
        return [(r.t_lo, r.t_hi) for _, r in self.terms]

    def times(self) -> set[float]:
        return {t for r in self.time_intervals() for t in r}

    def size_breaks(self) -> tuple[float, ...]:
        return tuple(x for _, r in self.terms for x in (r.x_lo, r.x_hi))

    def norm_sq(self, triplet: LevyTriplet) -> float:
        """L2(m) norm squared; disjointness removes the cross terms."""
        return sum(c * c * m_measure(triplet, r) for c, r in self.terms)


@dataclass(frozen=True)
class SeparableKernel:
    """1_(t_lo, t_hi] (t) phi(x)."""

    t_lo: float
    t_hi: float
    profile: Profile

    def __post_init__(self):
        if not 0.0 <= self.t_lo < self.t_hi:
            raise DomainError(f"need 0 <= t_lo < t_hi, got ({self.t_lo}, {self.t_hi}]")

    def value(self, t: float, x):
        x = np.asarray(x, dtype=float)
        if not self.t_lo < t <= self.t_hi:
            return np.zeros_like(x)
        return np.asarray(self.profile(x), dtype=float) * np.ones_like(x)

    def time_intervals(self) -> list[tuple[float, float]]:
        return [(self.t_lo, self.t_hi)]

    def times(self) -> set[float]:
        return {self.t_lo, self.t_hi}

    def size_breaks(self) -> tuple[float, ...]:
        return self.profile.breaks

    def norm_sq(self, triplet: LevyTriplet) -> float:
        phi0 = float(self.profile(np.array([0.0]))[0])
        jump = triplet.nu.integrate(lambda x: (x * self.profile(x)) ** 2,
                                     breaks=self.profile.breaks)
        return (self.t_hi - self.t_lo) * (triplet.sigma ** 2 * phi0 ** 2 + jump)


Kernel = StepKernel | SeparableKernel


def _intervals_disjoint(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> bool:
    return all(hi1 <= lo2 or hi2 <= lo1 for lo1, hi1 in a for lo2, hi2 in b)


@dataclass(frozen=True)
class TensorKernel:
    """k_1 (x) ... (x) k_N with pairwise disjoint time projections."""

    factors: tuple[Kernel, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise DomainError("a tensor kernel needs at least one factor")
        for i, a in enumerate(self.factors):
            for b in self.factors[i + 1:]:
                if not _intervals_disjoint(a.time_intervals(), b.time_intervals()):
                    raise DomainError("tensor factors must have disjoint time projections")

    @property
    def order(self) -> int:
        return len(self.factors)

    def times(self) -> set[float]:
        return set().union(*(k.times() for k in self.factors))


@lru_cache(maxsize=1024)
def _separable_compensator(triplet: LevyTriplet, profile: Profile) -> float:
    return triplet.nu.integrate(lambda x: x * profile(x), breaks=profile.breaks)


def _check_horizon(path: Path, t_hi: float):
    if t_hi > path.horizon:
        raise DomainError(f"time {t_hi} beyond the horizon {path.horizon}")


def eval_M(path: Path, r: Rect) -> float:
    """M(r) on a path: Gaussian part, jump sum and compensator."""
    _check_horizon(path, r.t_hi)
    triplet = path.triplet
    total = 0.0
    if r.contains_zero and triplet.sigma > 0.0:
        w_lo, w_hi = path.W([r.t_lo, r.t_hi])
        total += triplet.sigma * (w_hi - w_lo)
    _, sizes = path.jumps_in(r.t_lo, r.t_hi)
    if sizes.size:
        total += float(sizes[(sizes > r.x_lo) & (sizes <= r.x_hi)].sum())
    return total - r.duration * jump_first_moment(triplet, r.x_lo, r.x_hi)


def eval_I1(path: Path, k: Kernel) -> float:
    """First multiple integral of a step or separable kernel."""
    if isinstance(k, StepKernel):
        return sum(c * eval_M(path, r) for c, r in k.terms)
    _check_horizon(path, k.t_hi)
    triplet = path.triplet
    phi = k.profile
    total = 0.0
    if triplet.sigma > 0.0:
        w_lo, w_hi = path.W([k.t_lo, k.t_hi])
        total += triplet.sigma * float(phi(np.array([0.0]))[0]) * (w_hi - w_lo)
    _, sizes = path.jumps_in(k.t_lo, k.t_hi)
    if sizes.size:
        total += float(np.sum(sizes * phi(sizes)))
    return total - (k.t_hi - k.t_lo) * _separable_compensator(triplet, phi)


def eval_IN(path: Path, tk: TensorKernel) -> float:
    """I_N of a time-disjoint tensor: the product of first integrals."""
    return math.prod(eval_I1(path, k) for k in tk.factors)


def derivative_of_elementary(path: Path, tk: TensorKernel, t: float, x):
    """D_{t,x} I_N(k_1 (x) ... (x) k_N) = sum_i k_i(t, x) prod_{j != i} I_1(k_j).

    Vectorized over x.
    """
    x = np.asarray(x, dtype=float)
    firsts = [eval_I1(path, k) for k in tk.factors]
    out = np.zeros_like(x)
    for i, k in enumerate(tk.factors):
        rest = math.prod(v for j, v in enumerate(firsts) if j != i)
        out = out + k.value(t, x) * rest
    return out
