"""Constructive approximations by smooth functionals, measured in D_{1,2}.

Partition sums of psi(x) = x phi(x) over increments approximate first
integrals; products of such sums with smoothed indicators and a cutoff
approximate products of M over time-disjoint rectangles; splitting a time
interval into cells separates a product of M over one interval into a sum of
time-disjoint products plus a remainder of known norm.
"""
import itertools
import math
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np
from scipy.stats import norm, poisson

from .chaos import MAX_ENUMERATION, equal_cells, s2_norm_direct, s2_norm_formula
from .errors import BoundViolationError, DomainError, VarianceBudgetError
from .log import get_logger
from .malliavin import (
    ChaosFunctional,
    Functional,
    LinearCombination,
    RectProduct,
    Smoothness,
    SmoothFunctional,
    d12_norm_sq_mc,
    d12_parts_mc,
    difference,
    eval_D,
    product,
)
from .measures import AtomicJumps, LevyTriplet, Rect, m_measure, mu_measure
from .paths import MCEstimate, derive_seed, mc_run, mc_run_vector, replicate_rng, simulate_path
from .quadrature import check_doubling, checked_integrate
from .random_measure import Profile, SeparableKernel, StepKernel, TensorKernel

logger = get_logger(__name__)

POISSON_TAIL = 1e-12
GAUSS_WINDOW = 12.0
GAUSS_PANELS = 64
RAMP_SLOPE = 1.875
MAX_HALVINGS = 60
GRID_POINTS = 10 ** 4
S2_RTOL = 1e-14


def smoothstep5(u):
    """6u^5 - 15u^4 + 10u^3 clipped to [0, 1]."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u ** 3 * (u * (6.0 * u - 15.0) + 10.0)


def dsmoothstep5(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 30.0 * u ** 2 * (1.0 - u) ** 2, 0.0)


@dataclass(frozen=True)
class Partition:
    """s = t_0 < t_1 < ... < t_k = u."""

    points: tuple[float, ...]

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 2:
            raise DomainError("a partition needs at least two points")
        if any(b <= a for a, b in zip(points, points[1:])):
            raise DomainError("partition points must be strictly increasing")

    @classmethod
    def uniform(cls, s: float, u: float, cells: int) -> "Partition":
        if cells < 1:
            raise DomainError(f"need at least one cell, got {cells}")
        points = np.linspace(s, u, cells + 1)
        points[0], points[-1] = s, u
        return cls(tuple(points))

    @classmethod
    def with_mesh(cls, s: float, u: float, mesh: float) -> "Partition":
        """Equal cells of width at most mesh."""
        return cls.uniform(s, u, max(1, math.ceil((u - s) / mesh - 1e-12)))

    @property
    def interval(self) -> tuple[float, float]:
        return self.points[0], self.points[-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def mesh(self) -> float:
        return float(self.widths.max())


def dyadic_schedule(s: float, u: float, exponents=(2, 4, 6, 8)) -> list[Partition]:
    """Partitions of (s, u] into 2^e equal cells."""
    return [Partition.uniform(s, u, 2 ** e) for e in exponents]


@dataclass(frozen=True)
class SmoothIndicator:
    """Smoothed 1_(a, b]: equal to 1 on C = [a + w, b - w], supported in U = (a - w, b + w)."""

    a: float
    b: float
    width: float
    slack: float

    @classmethod
    def build(cls, a: float, b: float, triplet: LevyTriplet, delta: float) -> "SmoothIndicator":
        """Halve the ramp width until mu(U \\ C) <= delta."""
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise DomainError(f"need a finite interval, got ({a}, {b}]")
        if delta <= 0.0:
            raise DomainError("smoothing slack must be positive")
        w = min(0.25, (b - a) / 4.0)
        for _ in range(MAX_HALVINGS):
            slack = mu_measure(triplet, a - w, a + w) + mu_measure(triplet, b - w, b + w)
            if slack <= delta:
                logger.debug("indicator of (%s, %s]: width %g, slack %g", a, b, w, slack)
                return cls(a, b, w, slack)
            w /= 2.0
        raise DomainError(
            f"mu charges the boundary of ({a}, {b}]; slack {slack} stays above {delta}")

    @property
    def inner(self) -> tuple[float, float]:
        return self.a + self.width, self.b - self.width

    @property
    def outer(self) -> tuple[float, float]:
        return self.a - self.width, self.b + self.width

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        span = 2.0 * self.width
        out = smoothstep5((x - self.a + self.width) / span) * smoothstep5(
            (self.b + self.width - x) / span)
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        span = 2.0 * self.width
        up, down = (x - self.a + self.width) / span, (self.b + self.width - x) / span
        out = (dsmoothstep5(up) * smoothstep5(down) - smoothstep5(up) * dsmoothstep5(down)) / span
        return out if out.ndim else float(out)

    @property
    def profile(self) -> Profile:
        lo, hi = self.outer
        c_lo, c_hi = self.inner
        return Profile(self, self.derivative, (lo, hi), 1.0, RAMP_SLOPE / (2.0 * self.width),
                       knots=(lo, c_lo, c_hi, hi))

    def inner_products(self, triplet: LevyTriplet) -> tuple[float, float, float]:
        """(||1_A||^2, <1_A, phi>, ||phi||^2) in L2(mu)."""
        s2 = triplet.sigma ** 2
        indicator_at_0 = 1.0 if self.a < 0.0 <= self.b else 0.0
        phi0 = float(self(0.0))
        nu = triplet.nu
        knots = self.profile.knots
        return (
            s2 * indicator_at_0 + nu.integrate(np.square, self.a, self.b),
            s2 * indicator_at_0 * phi0
            + nu.integrate(lambda x: x * x * self(x), self.a, self.b, knots),
            s2 * phi0 ** 2 + nu.integrate(lambda x: (x * self(x)) ** 2, *self.outer, knots),
        )

    def l2_error_sq(self, triplet: LevyTriplet) -> float:
        """||1_A - phi||^2 in L2(mu)."""
        a2, cross, p2 = self.inner_products(triplet)
        return max(a2 - 2.0 * cross + p2, 0.0)


@dataclass(frozen=True)
class CutoffFn:
    """beta_N = 1 on [-N, N] and ramps to 0 on N < |y| < N + 2.

    alpha_N multiplies beta_N over the increments of the path values.
    """

    level: float

    def __post_init__(self):
        if self.level <= 0.0:
            raise DomainError(f"cutoff level must be positive, got {self.level}")

    def beta(self, y):
        return 1.0 - smoothstep5((np.abs(np.asarray(y, dtype=float)) - self.level) / 2.0)

    def dbeta(self, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * dsmoothstep5((np.abs(y) - self.level) / 2.0) * np.sign(y)

    @staticmethod
    def _increments(y):
        y = np.asarray(y, dtype=float)
        return np.diff(y, axis=-1, prepend=0.0)

    def alpha(self, y):
        """prod_i beta_N(y_i - y_{i-1}) with y_{-1} = 0."""
        return np.prod(self.beta(self._increments(y)), axis=-1)

    def grad_alpha(self, y):
        d = self._increments(y)
        b = self.beta(d)
        n = d.shape[-1]
        ones = np.ones(d.shape[:-1] + (1,))
        before = np.cumprod(np.concatenate([ones, b[..., :-1]], axis=-1), axis=-1)
        shifted = np.concatenate([b[..., 1:], ones], axis=-1)
        after = np.flip(np.cumprod(np.flip(shifted, -1), -1), -1)
        g = self.dbeta(d) * before * after
        out = g.copy()
        if n > 1:
            out[..., :-1] -= g[..., 1:]
        return out

    def bbox(self, n: int) -> tuple[tuple[float, float], ...]:
        reach = self.level + 2.0
        return tuple((-(i + 1) * reach, (i + 1) * reach) for i in range(n))

    def kinks(self, y, active):
        """Sizes where the shifted increment crosses a ramp end of beta_N."""
        i0 = int(np.argmax(active))
        d = self._increments(y)[i0]
        ends = np.array([-self.level - 2.0, -self.level, self.level, self.level + 2.0])
        return ends - d

    def functional(self, times) -> SmoothFunctional:
        times = tuple(times)
        return SmoothFunctional(times, self.alpha, self.grad_alpha,
                                Smoothness.COMPACT_SUPPORT_SMOOTH, self.bbox(len(times)),
                                kinks=self.kinks)

    def apply(self, F: SmoothFunctional) -> SmoothFunctional:
        """alpha_N F, compactly supported in the path values."""
        cut = product(F, self.functional(F.times))
        return replace(cut, smoothness=Smoothness.COMPACT_SUPPORT_SMOOTH,
                       bbox=self.bbox(len(cut.times)), check_gradient=False)


def _psi(profile: Profile):
    def psi(x):
        x = np.asarray(x, dtype=float)
        return x * profile(x)

    def dpsi(x):
        x = np.asarray(x, dtype=float)
        return profile(x) + x * profile.dfn(x)

    return psi, dpsi


def _poisson_cutoff(mean: float) -> int:
    k = 0
    while poisson.sf(k, mean) >= POISSON_TAIL:
        k += 1
    return k


def _jump_sum_law(nu: AtomicJumps, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Values and probabilities of the compound Poisson sum over a cell with nu-mass rate."""
    positions = np.array(nu.positions)
    p = np.array(nu.intensities) / sum(nu.intensities)
    values, probs = [], []
    for k in range(_poisson_cutoff(rate) + 1):
        pk = poisson.pmf(k, rate)
        for choice in itertools.combinations_with_replacement(range(len(positions)), k):
            counts = np.bincount(np.array(choice, dtype=int), minlength=len(positions))
            multinomial = math.factorial(k) / math.prod(math.factorial(c) for c in counts)
            values.append(float(np.dot(counts, positions)))
            probs.append(pk * multinomial * float(np.prod(p ** counts)))
    return np.array(values), np.array(probs)


def _gaussian_expectation(fn, profile: Profile, mean: float, sd: float) -> float:
    """E fn(mean + sd Z) for fn vanishing outside the profile support."""
    if sd == 0.0:
        return float(fn(np.array([mean]))[0])
    lo, hi = profile.support
    lo, hi = max(lo, mean - GAUSS_WINDOW * sd), min(hi, mean + GAUSS_WINDOW * sd)
    if not hi > lo:
        return 0.0
    cuts = [lo] + [k for k in sorted(profile.knots) if lo < k < hi] + [hi]
    return sum(
        checked_integrate(lambda y: fn(y) * norm.pdf(y, mean, sd), a, b, GAUSS_PANELS)
        for a, b in zip(cuts[:-1], cuts[1:])
    )


def expected_increment_value(fn, profile: Profile, triplet: LevyTriplet, h: float) -> float:
    """E fn(X_h) for atomic nu by conditioning on the jump counts of the cell."""
    values, probs = _jump_sum_law(triplet.nu, triplet.nu.mass() * h)
    sd = triplet.sigma * math.sqrt(h)
    return math.fsum(
        p * _gaussian_expectation(fn, profile, triplet.drift * h + v, sd)
        for v, p in zip(values, probs)
    )


def build_Gn(profile: Profile, partition: Partition, triplet: LevyTriplet, seed: int = 0,
             expectation_reps: int = 20000, variance_budget: float = 1e-3) -> SmoothFunctional:
    """sum_j psi(X_{t_j} - X_{t_{j-1}}) minus its expectation, psi(x) = x phi(x).

    The expectation is exact for atomic nu and an independent Monte Carlo mean
    otherwise; its standard error is kept as the functional's offset_stderr.
    """
    psi, dpsi = _psi(profile)
    widths = partition.widths
    s, u = partition.interval
    if isinstance(triplet.nu, AtomicJumps):
        cache: dict[float, float] = {}
        for h in widths:
            key = round(float(h), 14)
            if key not in cache:
                cache[key] = expected_increment_value(psi, profile, triplet, float(h))
        expectation = math.fsum(cache[round(float(h), 14)] for h in widths)
        offset_stderr = 0.0
    else:
        points = partition.points

        def raw(path):
            return float(np.sum(psi(np.diff(path.X(points)))))

        est = mc_run(raw, expectation_reps, derive_seed(seed, 0), triplet, u, points)
        if est.stderr > variance_budget:
            raise VarianceBudgetError(
                f"expectation stderr {est.stderr:.3g} exceeds the budget {variance_budget:.3g}"
            )
        expectation, offset_stderr = est.mean, est.stderr
    logger.debug("partition sum over (%s, %s] with %d cells, mean %r",
                 s, u, widths.size, expectation)

    def f(y):
        d = np.diff(np.asarray(y, dtype=float), axis=-1)
        return np.sum(psi(d), axis=-1) - expectation

    def grad_f(y):
        g = dpsi(np.diff(np.asarray(y, dtype=float), axis=-1))
        zeros = np.zeros(g.shape[:-1] + (1,))
        return np.concatenate([zeros, g], axis=-1) - np.concatenate([g, zeros], axis=-1)

    knots = np.asarray(profile.breaks)

    def kinks(y, active):
        # a shift from point i0 on moves only the increment ending at i0
        i0 = int(np.argmax(active))
        if i0 == 0:
            return knots[:0]
        return knots - (y[i0] - y[i0 - 1])

    return SmoothFunctional(partition.points, f, grad_f, shift_invariant=True,
                            offset_stderr=offset_stderr, kinks=kinks)


def first_integral(profile: Profile, s: float, u: float) -> ChaosFunctional:
    """I_1(1_(s,u] (x) phi)."""
    return ChaosFunctional(TensorKernel((SeparableKernel(s, u, profile),)))


def d12_distance_sq(Fa: Functional, Fb: Functional, triplet: LevyTriplet, horizon: float,
                    n_reps: int, seed: int, threads: int | None = None) -> MCEstimate:
    """E|Fa - Fb|^2 + E||D Fa - D Fb||^2_{L2(m)}."""
    return d12_norm_sq_mc(difference(Fa, Fb), triplet, horizon, n_reps, seed, threads=threads)


def d12_distance_parts(Fa: Functional, Fb: Functional, triplet: LevyTriplet, horizon: float,
                       n_reps: int, seed: int, threads: int | None = None) -> dict[str, MCEstimate]:
    return d12_parts_mc(difference(Fa, Fb), triplet, horizon, n_reps, seed, threads)


def _single_atom(triplet: LevyTriplet) -> tuple[float, float]:
    nu = triplet.nu
    if not (isinstance(nu, AtomicJumps) and len(nu.positions) == 1):
        raise DomainError("the pure-jump oracle needs nu = lambda delta_a")
    if triplet.sigma != 0.0 or triplet.drift != 0.0:
        raise DomainError("the pure-jump oracle needs sigma = 0 and b = 0")
    return nu.positions[0], nu.intensities[0]


def pure_jump_distance_oracle(profile: Profile, partition: Partition,
                              triplet: LevyTriplet) -> tuple[float, float]:
    """Exact (value part, derivative part) of ||I_1(1_T phi) - G^n||^2 for nu = lambda delta_a.

    With k_j ~ Poisson(lambda h_j) jumps in cell j the difference is
    sum_j [a phi(a) k_j - psi(a k_j)] centered, and its derivative on cell j at
    x = a is phi(a) - [psi(a k_j + a) - psi(a k_j)] / a.
    """
    a, lam = _single_atom(triplet)
    psi, _ = _psi(profile)
    phi_a = float(profile(np.array([a]))[0])
    value = derivative = 0.0
    for h in partition.widths:
        rate = lam * float(h)
        k = np.arange(_poisson_cutoff(rate) + 1)
        p = poisson.pmf(k, rate)
        diff = a * phi_a * k - psi(a * k)
        mean = float(np.dot(p, diff))
        value += float(np.dot(p, (diff - mean) ** 2))
        quotient = (psi(a * k + a) - psi(a * k)) / a
        derivative += float(h) * lam * a * a * float(np.dot(p, (phi_a - quotient) ** 2))
    return value, derivative


@dataclass(frozen=True)
class ErrorTerms:
    zero_part: MCEstimate
    jump_part: MCEstimate
    zero_bound: float
    jump_bound: float


def lemma4_error_terms(profile: Profile, partition: Partition, triplet: LevyTriplet,
                       horizon: float, n_reps: int, seed: int,
                       threads: int | None = None) -> ErrorTerms:
    """The two derivative error integrals of G^n against I_1(1_T phi), with pathwise domination.

    zero part: sigma^2 sum_j h_j [phi(0) - psi'(dX_j)]^2,
    jump part: sum_j h_j int [psi(dX_j + x) - psi(dX_j) - psi(x)]^2 dnu(x).
    """
    psi, dpsi = _psi(profile)
    sup_psi, sup_dpsi = profile.psi_bounds()
    zero_bound = (profile.sup + sup_dpsi) ** 2
    jump_const = (sup_dpsi + profile.sup + 3.0 * sup_psi) ** 2
    points = partition.points
    widths = partition.widths
    phi0 = float(profile(np.array([0.0]))[0])
    nu = triplet.nu
    knots = np.asarray(profile.breaks)

    def jump_integrand(dj, x):
        values = (psi(dj + x) - psi(dj) - psi(x)) ** 2
        bounds = jump_const * np.minimum(np.abs(x), 1.0) ** 2
        if np.any(values > bounds * (1.0 + 1e-12) + 1e-300):
            raise BoundViolationError("jump-part integrand exceeds its dominating bound")
        return values

    def jump_cells(d):
        if nu.exact_nodes:
            x, w = nu.nodes()
            x, w = np.asarray(x), np.asarray(w)
            return jump_integrand(d[:, None], x[None, :]) @ w
        out = np.empty(d.size)
        for j, dj in enumerate(d):
            breaks = np.concatenate([knots, knots - dj])
            xc, wc = nu.nodes(breaks)
            xf, wf = nu.nodes(breaks, refine=2)
            values = wf * jump_integrand(dj, xf)
            out[j] = float(values.sum())
            check_doubling(float(np.dot(wc, jump_integrand(dj, xc))), out[j],
                           float(np.abs(values).sum()), f"the size axis in cell {j}")
        return out

    def estimator(path):
        d = np.diff(path.X(points))
        zero_integrand = (phi0 - dpsi(d)) ** 2
        if np.any(zero_integrand > zero_bound * (1.0 + 1e-12)):
            raise BoundViolationError(f"zero-part integrand exceeds {zero_bound!r}")
        return np.array([
            triplet.sigma ** 2 * float(np.dot(widths, zero_integrand)),
            float(np.dot(widths, jump_cells(d))),
        ])

    zero, jump = mc_run_vector(estimator, n_reps, seed, triplet, horizon, points, threads)
    return ErrorTerms(zero, jump, zero_bound, jump_const)


def _check_disjoint_sizes(a_list):
    for i, (lo1, hi1) in enumerate(a_list):
        if not lo1 < hi1:
            raise DomainError(f"need a_lo < a_hi, got ({lo1}, {hi1}]")
        for lo2, hi2 in a_list[i + 1:]:
            if lo1 < hi2 and lo2 < hi1:
                raise DomainError(f"size sets ({lo1}, {hi1}] and ({lo2}, {hi2}] overlap")


@dataclass(frozen=True)
class Disjointified:
    s1: list[TensorKernel]
    s2_norm: float
    constant: float
    target: RectProduct

    def remainder(self) -> LinearCombination:
        """S_2 = prod M - sum S_1 as a functional."""
        terms = [(1.0, self.target)] + [(-1.0, ChaosFunctional(tk)) for tk in self.s1]
        return LinearCombination(tuple(terms))


def disjointify(triplet: LevyTriplet, T: tuple[float, float], a_list, tail,
                N: int) -> Disjointified:
    """Split prod_i M(T x A_i) prod_k M(T_k x A_k) over N equal cells of T.

    S_1 collects the products over distinct cells, time-disjoint by
    construction; the rest S_2 has the closed-form norm
    c |T|^m (1 - (1 - 1/N)...(1 - (m-1)/N)), c = (n+1) prod mu(A_i) prod m(T_k x A_k).
    """
    a_list = [tuple(a) for a in a_list]
    tail = [(tuple(t), tuple(a)) for t, a in tail]
    m, n = len(a_list), len(a_list) + len(tail)
    if m < 1 or N < 1:
        raise DomainError(f"need m >= 1 and N >= 1, got m={m}, N={N}")
    _check_disjoint_sizes(a_list)
    mus = [mu_measure(triplet, lo, hi) for lo, hi in a_list]
    if min(mus) <= 0.0:
        raise DomainError("every size set needs positive mu-measure")
    for (t_lo, t_hi), _ in tail:
        if not (t_hi <= T[0] or T[1] <= t_lo):
            raise DomainError(f"tail interval ({t_lo}, {t_hi}] meets ({T[0]}, {T[1]}]")
    tail_rects = [Rect(t_lo, t_hi, a_lo, a_hi) for (t_lo, t_hi), (a_lo, a_hi) in tail]
    tail_factor = math.prod(m_measure(triplet, r) for r in tail_rects)
    constant = (n + 1) * math.prod(mus) * tail_factor
    target = RectProduct(tuple(Rect(T[0], T[1], lo, hi) for lo, hi in a_list) + tuple(tail_rects))

    if m > N:
        return Disjointified([], s2_norm_direct(triplet, T, a_list, tail, N), constant, target)

    s2 = s2_norm_formula(m, N, T[1] - T[0], constant)
    if N ** m <= MAX_ENUMERATION:
        direct = s2_norm_direct(triplet, T, a_list, tail, N)
        if abs(direct - s2) > S2_RTOL * max(abs(s2), abs(direct), 1e-300):
            raise BoundViolationError(f"enumerated remainder norm {direct!r} differs from {s2!r}")
    cells = equal_cells(T[0], T[1], N)
    tail_kernels = tuple(StepKernel.indicator(r) for r in tail_rects)
    s1 = [
        TensorKernel(tuple(
            StepKernel.indicator(Rect(*cells[j], lo, hi)) for j, (lo, hi) in zip(idx, a_list)
        ) + tail_kernels)
        for idx in itertools.permutations(range(N), m)
    ]
    return Disjointified(s1, s2, constant, target)


@dataclass(frozen=True)
class PipelineResult:
    approximant: SmoothFunctional
    target: RectProduct
    distance: MCEstimate
    smoothing_error: float
    smoothing_bound: float
    slack_bound: float
    indicators: tuple[SmoothIndicator, ...]
    factors: tuple[SmoothFunctional, ...]


def _target_rects(target: TensorKernel) -> list[Rect]:
    rects = []
    for k in target.factors:
        if not (isinstance(k, StepKernel) and len(k.terms) == 1):
            raise DomainError("the pipeline target must be a tensor of single rectangle indicators")
        c, r = k.terms[0]
        if c != 1.0:
            raise DomainError("the pipeline target must use unit coefficients")
        rects.append(r)
    return rects


def smoothing_report(rects: list[Rect], indicators,
                     triplet: LevyTriplet) -> tuple[float, float, float]:
    """(prod |T_i| ||1_A - phi||^2 over mu^N, (N+1)! times it, telescoping slack bound)."""
    products = [ind.inner_products(triplet) for ind in indicators]
    a2 = math.prod(p[0] for p in products)
    cross = math.prod(p[1] for p in products)
    p2 = math.prod(p[2] for p in products)
    tensor_error = max(a2 - 2.0 * cross + p2, 0.0)
    telescoped = sum(
        math.prod(math.sqrt(p[2]) for p in products[:i])
        * math.sqrt(ind.slack)
        * math.prod(math.sqrt(p[0]) for p in products[i + 1:])
        for i, ind in enumerate(indicators)
    ) ** 2
    if tensor_error > telescoped * (1.0 + 1e-9) + 1e-15:
        raise BoundViolationError(
            f"tensor smoothing error {tensor_error!r} exceeds the slack bound {telescoped!r}"
        )
    durations = math.prod(r.duration for r in rects)
    error = durations * tensor_error
    return error, math.factorial(len(rects) + 1) * error, durations * telescoped


def theorem1_pipeline(target: TensorKernel, delta: float, mesh: float, cutoff: float,
                      triplet: LevyTriplet, horizon: float, n_reps: int, seed: int,
                      threads: int | None = None, expectation_reps: int = 20000,
                      variance_budget: float = 1e-3) -> PipelineResult:
    """Smooth each indicator, replace each M(T_i x A_i) by a partition sum, multiply and cut off.

    ``expectation_reps`` and ``variance_budget`` govern the Monte Carlo centering
    of the partition sums when nu has a density.
    """
    rects = _target_rects(target)
    indicators = tuple(SmoothIndicator.build(r.x_lo, r.x_hi, triplet, delta) for r in rects)
    factors = [
        build_Gn(ind.profile, Partition.with_mesh(r.t_lo, r.t_hi, mesh), triplet,
                 seed=derive_seed(seed, i + 1), expectation_reps=expectation_reps,
                 variance_budget=variance_budget)
        for i, (r, ind) in enumerate(zip(rects, indicators))
    ]
    approximant = CutoffFn(cutoff).apply(reduce(product, factors))
    goal = RectProduct(tuple(rects))
    error, bound, slack_bound = smoothing_report(rects, indicators, triplet)
    logger.info("pipeline delta=%g mesh=%g cutoff=%g: smoothing error %.3g", delta, mesh, cutoff,
                error)
    distance = d12_distance_sq(goal, approximant, triplet, horizon, n_reps, seed, threads)
    return PipelineResult(approximant, goal, distance, error, bound, slack_bound, indicators,
                          tuple(factors))


@dataclass(frozen=True)
class IndependenceReport:
    max_cross_term: float
    max_product_rule_error: float
    covariance: MCEstimate
    points: int


def product_independence_check(factors: list[SmoothFunctional], triplet: LevyTriplet,
                               horizon: float, n_paths: int, seed: int,
                               points_per_path: int = 100) -> IndependenceReport:
    """Cross terms x DG_i DG_j and the expanded derivative of prod G_i, path by path.

    With time-disjoint factors D prod G_i = sum_i (prod_{j != i} G_j) DG_i.
    """
    if len(factors) < 2:
        raise DomainError("need at least two factors")
    for i, a in enumerate(factors):
        for b in factors[i + 1:]:
            if not (a.times[-1] <= b.times[0] or b.times[-1] <= a.times[0]):
                raise DomainError("factors must live on disjoint time intervals")
    whole = reduce(product, factors)
    required = whole.times
    atoms = np.concatenate([[0.0], np.asarray(triplet.nu.nodes()[0])])
    t_max = max(required)
    cross_max = rule_max = 0.0
    checked = 0
    for i in range(n_paths):
        path = simulate_path(triplet, horizon, required, i, seed)
        rng = replicate_rng(derive_seed(seed, 1), i)
        values = [F.value(path) for F in factors]
        for t in rng.uniform(0.0, t_max, points_per_path):
            x = float(rng.choice(atoms))
            ds = [eval_D(F, path, t, x) for F in factors]
            for a, b in itertools.combinations(range(len(factors)), 2):
                cross_max = max(cross_max, abs(x * ds[a] * ds[b]))
            lhs = eval_D(whole, path, t, x)
            rhs = sum(
                math.prod(v for j, v in enumerate(values) if j != k) * ds[k]
                for k in range(len(factors))
            )
            rule_max = max(rule_max, abs(lhs - rhs) / (1.0 + abs(lhs)))
            checked += 1
    G1, G2 = factors[0], factors[1]
    covariance = mc_run(lambda p: G1.value(p) * G2.value(p), max(n_paths, 2), derive_seed(seed, 2),
                        triplet, horizon, required)
    return IndependenceReport(cross_max, rule_max, covariance, checked)


def grid_check_cutoff(cutoff: CutoffFn) -> dict[str, float]:
    """Worst violations of the three beta_N properties on a 10^4-point grid."""
    y = np.linspace(-cutoff.level - 4.0, cutoff.level + 4.0, GRID_POINTS)
    b = cutoff.beta(y)
    plateau = np.abs(y) <= cutoff.level
    outside = np.abs(y) >= cutoff.level + 2.0
    return {
        "range": float(max(0.0, -b.min(), b.max() - 1.0)),
        "plateau": float(np.max(np.abs(b[plateau] - 1.0))),
        "support": float(np.max(np.abs(b[outside]))),
        "slope": float(np.max(np.abs(cutoff.dbeta(y)))),
    }


def grid_check_indicator(indicator: SmoothIndicator) -> float:
    """Worst violation of 1_C <= phi <= 1_U on a 10^4-point grid around U."""
    lo, hi = indicator.outer
    pad = hi - lo
    x = np.linspace(lo - pad, hi + pad, GRID_POINTS)
    phi = indicator(x)
    c_lo, c_hi = indicator.inner
    in_c = ((x >= c_lo) & (x <= c_hi)).astype(float)
    in_u = ((x > lo) & (x < hi)).astype(float)
    return float(max(np.max(in_c - phi), np.max(phi - in_u), 0.0))
