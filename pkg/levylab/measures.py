"""Levy triplets, jump measures and the measures mu and m on time-size space.

The process is parametrized by the genuine drift b of the finite-activity
decomposition

    X_t = b t + sigma W_t + sum_{s <= t} dX_s,

and ``LevyTriplet.gamma`` converts to the truncated-triplet drift
gamma = b + int_{|x| <= 1} x dnu(x).

mu(dx) = sigma^2 delta_0(dx) + x^2 nu(dx) lives on the size axis and
m = dt (x) mu on time-size space.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError, QuadratureError
from .quadrature import DEFAULT_ORDER, checked_integrate, integrate, split_nodes

CDF_TABLE_SIZE = 4096


class Flavor(Enum):
    """Part of the size axis a norm or measure is restricted to."""

    FULL = "full"
    ZERO_PART = "zero"
    JUMP_PART = "jump"


class JumpMeasure(ABC):
    """Finite-activity Levy measure nu on R without atom at 0."""

    #: True when ``nodes`` integrate every function exactly.
    exact_nodes: bool = False

    @abstractmethod
    def integrate(self, h: Callable, lo: float = -math.inf, hi: float = math.inf,
                  breaks: Iterable[float] = ()) -> float:
        """Integral of h over (lo, hi] against nu; quadrature is split at ``breaks``."""

    @abstractmethod
    def nodes(self, breaks: Iterable[float] = (),
              refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights with sum(w * h(x)) = int h dnu (exact or quadrature).

        Quadrature nodes are cut at ``breaks`` and use ``refine`` times the panels.
        """

    @abstractmethod
    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Draw k jump sizes from nu / nu(R)."""

    @property
    @abstractmethod
    def epsilon(self) -> float:
        """Radius of a neighbourhood of 0 carrying no mass."""

    def mass(self) -> float:
        """Total mass nu(R)."""
        return self.integrate(np.ones_like)

    def second_moment(self) -> float:
        """int x^2 dnu(x)."""
        return self.integrate(np.square)



@dataclass(frozen=True)
class AtomicJumps(JumpMeasure):
    """nu = sum_k intensity_k * delta_{position_k}."""

    exact_nodes = True

    positions: tuple[float, ...]
    intensities: tuple[float, ...]

    def __post_init__(self):
        positions = tuple(float(x) for x in self.positions)
        intensities = tuple(float(v) for v in self.intensities)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "intensities", intensities)
        if not positions:
            raise DomainError("jump measure needs at least one atom")
        if len(positions) != len(intensities):
            raise DomainError("positions and intensities differ in length")
        if len(set(positions)) != len(positions):
            raise DomainError("atom positions must be distinct")
        for x, lam in zip(positions, intensities):
            if x == 0.0 or not math.isfinite(x):
                raise DomainError(f"invalid atom position {x}")
            if not (lam > 0.0 and math.isfinite(lam)):
                raise DomainError(f"invalid atom intensity {lam}")

    @classmethod
    def of(cls, *atoms: tuple[float, float]) -> "AtomicJumps":
        """Build from (position, intensity) pairs."""
        return cls(tuple(a[0] for a in atoms), tuple(a[1] for a in atoms))

    @cached_property
    def _x(self) -> np.ndarray:
        return np.array(self.positions)

    @cached_property
    def _w(self) -> np.ndarray:
        return np.array(self.intensities)

    @property
    def epsilon(self) -> float:
        return float(np.min(np.abs(self._x)))

    def integrate(self, h, lo=-math.inf, hi=math.inf, breaks=()) -> float:
        inside = (self._x > lo) & (self._x <= hi)
        if not inside.any():
            return 0.0
        values = np.asarray(h(self._x[inside]), dtype=float)
        total = float(np.dot(self._w[inside], values))
        if not math.isfinite(total):
            raise DomainError("integrand is not finite on the atoms of nu")
        return total

    def nodes(self, breaks=(), refine=1):
        return self._x, self._w

    def sample(self, rng, k):
        if k == 0:
            return np.empty(0)
        if len(self.positions) == 1:
            return np.full(k, self.positions[0])
        idx = rng.choice(len(self.positions), size=k, p=self._w / self._w.sum())
        return self._x[idx]


@dataclass(frozen=True)
class DensityJumps(JumpMeasure):
    """nu(dx) = density(x) dx on [x_lo, x_hi] minus (-epsilon, epsilon).

    A support that straddles 0 needs a declared epsilon; otherwise epsilon
    defaults to the distance from the support to 0.
    """

    density: Callable
    x_lo: float
    x_hi: float
    panels: int = 64
    declared_epsilon: float | None = field(default=None)

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise DomainError("density support needs x_lo < x_hi")
        straddles = self.x_lo < 0.0 < self.x_hi
        gap = 0.0 if straddles else min(abs(self.x_lo), abs(self.x_hi))
        if self.declared_epsilon is None:
            if gap <= 0.0:
                raise DomainError("density support must exclude a neighbourhood of 0; "
                                  "declare epsilon")
        elif not self.declared_epsilon > 0.0:
            raise DomainError(f"declared epsilon must be positive, got {self.declared_epsilon}")
        elif not straddles and self.declared_epsilon > gap:
            raise DomainError(f"declared epsilon {self.declared_epsilon} exceeds the gap {gap}")
        if not self.segments:
            raise DomainError(f"epsilon {self.epsilon} removes the whole support")
        if self.panels < 1:
            raise DomainError("panel count must be positive")
        mass = self.mass()
        if not (math.isfinite(mass) and mass > 0.0):
            raise QuadratureError(f"density has invalid total mass {mass}")

    @property
    def epsilon(self) -> float:
        if self.declared_epsilon is not None:
            return self.declared_epsilon
        return min(abs(self.x_lo), abs(self.x_hi))

    @cached_property
    def segments(self) -> tuple[tuple[float, float], ...]:
        """Pieces of the support that carry mass."""
        eps = self.epsilon
        pieces = ((self.x_lo, min(self.x_hi, -eps)), (max(self.x_lo, eps), self.x_hi))
        return tuple((a, b) for a, b in pieces if b > a)

    def _panels(self, a: float, b: float, refine: int) -> int:
        width = sum(hi - lo for lo, hi in self.segments)
        return max(1, math.ceil(refine * self.panels * (b - a) / width))

    def integrate(self, h, lo=-math.inf, hi=math.inf, breaks=()) -> float:
        breaks = tuple(breaks)
        total = 0.0
        for s_lo, s_hi in self.segments:
            a, b = max(lo, s_lo), min(hi, s_hi)
            if b > a:
                total += checked_integrate(lambda x: np.asarray(h(x)) * self.density(x), a, b,
                                           self._panels(a, b, 1), breaks=breaks)
        return total

    @cached_property
    def _nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self._split_nodes((), 1)

    def _split_nodes(self, breaks, refine):
        xs, ws = [], []
        for a, b in self.segments:
            x, w = split_nodes(a, b, breaks, self._panels(a, b, refine), DEFAULT_ORDER)
            xs.append(x)
            ws.append(w * np.asarray(self.density(x), dtype=float))
        return np.concatenate(xs), np.concatenate(ws)

    def nodes(self, breaks=(), refine=1):
        breaks = tuple(breaks)
        if not breaks and refine == 1:
            return self._nodes
        return self._split_nodes(breaks, refine)

    @cached_property
    def _cdf_tables(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        # piecewise-linear inverse CDF per segment on a fine grid
        tables = []
        for a, b in self.segments:
            edges = np.linspace(a, b, CDF_TABLE_SIZE + 1)
            cells = np.array([
                integrate(self.density, lo, hi, 1, DEFAULT_ORDER)
                for lo, hi in zip(edges[:-1], edges[1:])
            ])
            cdf = np.concatenate([[0.0], np.cumsum(cells)])
            tables.append((cdf[-1], cdf / cdf[-1], edges))
        return tables

    def sample(self, rng, k):
        tables = self._cdf_tables
        if len(tables) == 1:
            _, cdf, edges = tables[0]
            return np.interp(rng.random(k), cdf, edges)
        masses = np.array([t[0] for t in tables])
        which = rng.choice(len(tables), size=k, p=masses / masses.sum())
        u = rng.random(k)
        out = np.empty(k)
        for j, (_, cdf, edges) in enumerate(tables):
            pick = which == j
            out[pick] = np.interp(u[pick], cdf, edges)
        return out



@dataclass(frozen=True)
class LevyTriplet:
    """Drift b, Gaussian volatility sigma >= 0 and finite-activity jump measure nu."""

    drift: float
    sigma: float
    nu: JumpMeasure

    def __post_init__(self):
        if not (math.isfinite(self.drift) and math.isfinite(self.sigma)):
            raise DomainError("drift and sigma must be finite")
        if self.sigma < 0.0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")
        if not self.nu.mass() > 0.0:
            raise DomainError("jump measure must have positive mass")

    def gamma(self, truncation: float = 1.0) -> float:
        """Drift of the truncated representation: b + int_{|x| <= truncation} x dnu."""
        inner = self.nu.integrate(lambda x: x, -truncation, truncation)
        return self.drift + inner + _atom_moment_at(self.nu, -truncation)

    def mean(self) -> float:
        """E X_1 = b + int x dnu."""
        return self.drift + self.nu.integrate(lambda x: x)

    def mu_total(self) -> float:
        """mu(R) = sigma^2 + int x^2 dnu = Var X_1."""
        return self.sigma ** 2 + self.nu.second_moment()


def _atom_moment_at(nu: JumpMeasure, point: float) -> float:
    # (lo, hi] integrals miss an atom sitting exactly at the left endpoint
    if isinstance(nu, AtomicJumps):
        return sum(lam * x for x, lam in zip(nu.positions, nu.intensities) if x == point)
    return 0.0


@dataclass(frozen=True)
class Rect:
    """Half-open rectangle (t_lo, t_hi] x (x_lo, x_hi] in R_+ x R."""

    t_lo: float
    t_hi: float
    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not (math.isfinite(self.t_lo) and math.isfinite(self.t_hi)):
            raise DomainError("rectangle times must be finite")
        if not 0.0 <= self.t_lo < self.t_hi:
            raise DomainError(f"need 0 <= t_lo < t_hi, got ({self.t_lo}, {self.t_hi}]")
        if not self.x_lo < self.x_hi:
            raise DomainError(f"need x_lo < x_hi, got ({self.x_lo}, {self.x_hi}]")

    @property
    def contains_zero(self) -> bool:
        return self.x_lo < 0.0 <= self.x_hi

    @property
    def duration(self) -> float:
        return self.t_hi - self.t_lo

    def contains(self, t: float, x):
        """Indicator of the rectangle at (t, x); vectorized over x."""
        x = np.asarray(x, dtype=float)
        inside_t = self.t_lo < t <= self.t_hi
        return ((x > self.x_lo) & (x <= self.x_hi)) & inside_t

    def intersect(self, other: "Rect") -> "Rect | None":
        """Intersection rectangle, or None if empty."""
        t_lo, t_hi = max(self.t_lo, other.t_lo), min(self.t_hi, other.t_hi)
        x_lo, x_hi = max(self.x_lo, other.x_lo), min(self.x_hi, other.x_hi)
        if t_lo >= t_hi or x_lo >= x_hi:
            return None
        return Rect(t_lo, t_hi, x_lo, x_hi)

    def time_disjoint(self, other: "Rect") -> bool:
        return self.t_hi <= other.t_lo or other.t_hi <= self.t_lo

    def disjoint(self, other: "Rect") -> bool:
        return self.intersect(other) is None


def mu_measure(triplet: LevyTriplet, a: float, b: float, flavor: Flavor = Flavor.FULL) -> float:
    """mu((a, b]) = sigma^2 1{a < 0 <= b} + int_(a,b] x^2 dnu."""
    if not a < b:
        raise DomainError(f"need a < b, got ({a}, {b}]")
    total = 0.0
    if flavor is not Flavor.JUMP_PART and a < 0.0 <= b:
        total += triplet.sigma ** 2
    if flavor is not Flavor.ZERO_PART:
        total += triplet.nu.integrate(np.square, a, b)
    if not math.isfinite(total):
        raise QuadratureError(f"mu((a, b]) is not finite for ({a}, {b}]")
    return total


def m_measure(triplet: LevyTriplet, r: Rect | None, flavor: Flavor = Flavor.FULL) -> float:
    """m(r) = (t_hi - t_lo) mu((x_lo, x_hi]); the empty set (None) has measure 0."""
    if r is None:
        return 0.0
    return r.duration * mu_measure(triplet, r.x_lo, r.x_hi, flavor)


def m_intersection(triplet: LevyTriplet, r1: Rect, r2: Rect,
                   flavor: Flavor = Flavor.FULL) -> float:
    """m(r1 n r2)."""
    return m_measure(triplet, r1.intersect(r2), flavor)


def nu_integral(triplet: LevyTriplet, h: Callable, breaks: Iterable[float] = ()) -> float:
    """int h dnu; exact for atoms, panel-checked quadrature for densities.

    Points where h is not smooth go in ``breaks``.
    """
    return triplet.nu.integrate(h, breaks=breaks)


@lru_cache(maxsize=4096)
def jump_first_moment(triplet: LevyTriplet, lo: float, hi: float) -> float:
    """int_(lo,hi] x dnu(x), the compensator rate of a rectangle."""
    return triplet.nu.integrate(lambda x: x, lo, hi)
