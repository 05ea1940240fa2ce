"""The derivative operator on smooth functionals, D_{1,2} norms, product and chain rules.

For F = f(X_{t_1}, ..., X_{t_n}) the derivative field is

    D_{t,0} F = sum_i df/dx_i (X) 1_{[0,t_i]}(t),
    D_{t,x} F = [f(X + x 1_{[0,t]}(t_.)) - f(X)] / x,   x != 0,

piecewise constant in t with breakpoints at the t_i. The L2(m) norm of the
field is therefore a finite sum over time cells times an x-sum over the
Gaussian atom and the nodes of nu.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import BoundViolationError, DomainError, QuadratureError
from .log import get_logger
from .measures import Flavor, LevyTriplet, Rect
from .paths import MCEstimate, Path, mc_run_vector
from .quadrature import check_doubling, checked_integrate, composite_nodes
from .random_measure import TensorKernel, derivative_of_elementary, eval_IN, eval_M

logger = get_logger(__name__)

GRADIENT_PROBES = 20
GRADIENT_STEP = 1e-5
GRADIENT_RTOL = 1e-6
LIPSCHITZ_PAIRS = 1000
MOLLIFIER_PANELS = 256
MOLLIFIER_CHUNK = 512


class Smoothness(Enum):
    COMPACT_SUPPORT_SMOOTH = "compact"
    C1_EXTENDED = "c1"


class Functional(ABC):
    """A random variable with an evaluable derivative field on every path.

    Subclasses provide ``times``, the times the path grid must contain.
    """

    times: tuple[float, ...]
    offset_stderr: float = 0.0

    @abstractmethod
    def value(self, path: Path) -> float:
        ...

    @abstractmethod
    def derivative(self, path: Path, t: float, xs) -> np.ndarray:
        """D_{t,x} F for every x in xs."""

    def breakpoints(self) -> list[float]:
        """Times at which the derivative field may change in t."""
        return sorted(set(self.times))

    def size_breakpoints(self, path: Path, t: float) -> tuple[float, ...]:
        """Sizes x at which D_{t,x}F may fail to be smooth in x."""
        return ()

    def derivative_cells(self, path: Path, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Derivative at every (t, x) pair, shape (len(ts), len(xs))."""
        if len(ts) == 0:
            return np.zeros((0, len(xs)))
        return np.vstack([self.derivative(path, float(t), xs) for t in ts])


def _sample_points(n: int, bbox, rng: np.random.Generator) -> np.ndarray:
    if bbox is not None:
        lo = np.array([b[0] for b in bbox])
        hi = np.array([b[1] for b in bbox])
        return lo + (hi - lo) * rng.random((GRADIENT_PROBES, n))
    # random walks so that increments land in the usual supports
    return np.cumsum(rng.uniform(-2.0, 2.0, (GRADIENT_PROBES, n)), axis=1)


@dataclass(frozen=True, eq=False)
class SmoothFunctional(Functional):
    """F = f(X_{t_1}, ..., X_{t_n}).

    f maps (..., n) arrays to (...) arrays and grad_f maps (..., n) to (..., n).
    ``shift_invariant`` declares f(y + c) = f(y) for constant shifts c, so the
    derivative vanishes while every time is still ahead of t.
    ``kinks(y, active)`` returns the sizes x where f(y + x active) is not smooth
    in x; quadrature over nu is split there.
    """

    times: tuple[float, ...]
    f: Callable
    grad_f: Callable
    smoothness: Smoothness = Smoothness.C1_EXTENDED
    bbox: tuple[tuple[float, float], ...] | None = None
    shift_invariant: bool = False
    offset_stderr: float = 0.0
    check_gradient: bool = field(default=True, repr=False)
    kinks: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not times:
            raise DomainError("a smooth functional needs at least one time")
        if times[0] < 0.0 or any(b < a for a, b in zip(times, times[1:])):
            raise DomainError(f"times must be non-negative and non-decreasing: {times}")
        if self.smoothness is Smoothness.COMPACT_SUPPORT_SMOOTH:
            if self.bbox is None or len(self.bbox) != len(times):
                raise DomainError("compactly supported functionals need a bounding box per time")
        if self.check_gradient:
            self._check_gradient()

    def _check_gradient(self):
        rng = np.random.default_rng(len(self.times))
        points = _sample_points(len(self.times), self.bbox, rng)
        directions = rng.standard_normal(points.shape)
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        h = GRADIENT_STEP
        fd = (self.f(points + h * directions) - self.f(points - h * directions)) / (2 * h)
        exact = np.sum(self.grad_f(points) * directions, axis=1)
        bad = np.abs(fd - exact) > GRADIENT_RTOL * np.maximum(1.0, np.abs(exact))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(
                f"gradient disagrees with finite differences at {points[i].tolist()}: "
                f"{exact[i]!r} vs {fd[i]!r}"
            )

    def value(self, path):
        return float(self.f(path.X(self.times)))

    def _active(self, ts: np.ndarray) -> np.ndarray:
        active = (np.asarray(self.times)[None, :] >= ts[:, None]).astype(float)
        if self.shift_invariant:
            active[active.all(axis=1)] = 0.0
        return active

    def derivative(self, path, t, xs):
        if t < 0.0:
            raise DomainError(f"derivative needs t >= 0, got {t}")
        return self.derivative_cells(path, np.array([t]), xs)[0]

    def size_breakpoints(self, path, t):
        if self.kinks is None:
            return ()
        active = self._active(np.array([float(t)]))[0] > 0.0
        if not active.any():
            return ()
        return tuple(np.ravel(self.kinks(path.X(self.times), active)))

    def derivative_cells(self, path, ts, xs):
        ts = np.asarray(ts, dtype=float)
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((ts.size, xs.size))
        active = self._active(ts)
        live = active.any(axis=1)
        if not live.any():
            return out
        y = path.X(self.times)
        a = active[live]
        zero = xs == 0.0
        if zero.any():
            out[np.ix_(live, zero)] = (a @ self.grad_f(y))[:, None]
        if (~zero).any():
            x = xs[~zero]
            shifted = y[None, None, :] + x[None, :, None] * a[:, None, :]
            out[np.ix_(live, ~zero)] = (self.f(shifted) - float(self.f(y))) / x[None, :]
        return out


@dataclass(frozen=True, eq=False)
class ChaosFunctional(Functional):
    """c I_N(k_1 (x) ... (x) k_N) for a time-disjoint tensor kernel."""

    kernel: TensorKernel
    coefficient: float = 1.0

    @property
    def times(self):
        return tuple(sorted(self.kernel.times()))

    def value(self, path):
        return self.coefficient * eval_IN(path, self.kernel)

    def derivative(self, path, t, xs):
        return self.coefficient * derivative_of_elementary(path, self.kernel, t, xs)

    def size_breakpoints(self, path, t):
        return tuple(x for k in self.kernel.factors for x in k.size_breaks())


@dataclass(frozen=True, eq=False)
class RectProduct(Functional):
    """c prod_i M(B_i) for pairwise disjoint rectangles.

    Disjointness makes the product the multiple integral of 1_{B_1 x ... x B_n},
    with derivative sum_i 1_{B_i}(t, x) prod_{j != i} M(B_j).
    """

    rects: tuple[Rect, ...]
    coefficient: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))
        for i, a in enumerate(self.rects):
            for b in self.rects[i + 1:]:
                if not a.disjoint(b):
                    raise DomainError(f"rectangles {a} and {b} overlap")

    @property
    def times(self):
        return tuple(sorted({t for r in self.rects for t in (r.t_lo, r.t_hi)}))

    def value(self, path):
        return self.coefficient * math.prod(eval_M(path, r) for r in self.rects)

    def size_breakpoints(self, path, t):
        return tuple(x for r in self.rects for x in (r.x_lo, r.x_hi))

    def derivative(self, path, t, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ms = [eval_M(path, r) for r in self.rects]
        out = np.zeros_like(xs)
        for i, r in enumerate(self.rects):
            rest = math.prod(m for j, m in enumerate(ms) if j != i)
            out = out + r.contains(t, xs) * rest
        return self.coefficient * out


@dataclass(frozen=True, eq=False)
class LinearCombination(Functional):
    """constant + sum_k c_k F_k."""

    terms: tuple[tuple[float, Functional], ...]
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), F) for c, F in self.terms))

    @property
    def times(self):
        return tuple(sorted({t for _, F in self.terms for t in F.times}))

    @property
    def offset_stderr(self):
        return math.sqrt(sum((c * F.offset_stderr) ** 2 for c, F in self.terms))

    def breakpoints(self):
        return sorted({t for _, F in self.terms for t in F.breakpoints()})

    def size_breakpoints(self, path, t):
        return tuple(x for _, F in self.terms for x in F.size_breakpoints(path, t))

    def value(self, path):
        return self.constant + sum(c * F.value(path) for c, F in self.terms)

    def derivative(self, path, t, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return sum((c * F.derivative(path, t, xs) for c, F in self.terms), np.zeros_like(xs))

    def derivative_cells(self, path, ts, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((len(ts), xs.size))
        for c, F in self.terms:
            out += c * F.derivative_cells(path, ts, xs)
        return out


def difference(Fa: Functional, Fb: Functional) -> LinearCombination:
    return LinearCombination(((1.0, Fa), (-1.0, Fb)))


def eval_D(F: Functional, path: Path, t: float, x: float) -> float:
    """D_{t,x} F on one path."""
    if t < 0.0:
        raise DomainError(f"derivative needs t >= 0, got {t}")
    return float(F.derivative(path, t, np.array([x]))[0])


def _columns(times: tuple[float, ...], merged: tuple[float, ...]) -> list[int]:
    return [merged.index(t) for t in times]


def product(F: SmoothFunctional, G: SmoothFunctional) -> SmoothFunctional:
    """F G over the union of their times, gradient by the Leibniz rule."""
    merged = tuple(sorted(set(F.times) | set(G.times)))
    cf, cg = _columns(F.times, merged), _columns(G.times, merged)

    def f(y):
        y = np.asarray(y, dtype=float)
        return F.f(y[..., cf]) * G.f(y[..., cg])

    def grad_f(y):
        y = np.asarray(y, dtype=float)
        fv, gv = F.f(y[..., cf]), G.f(y[..., cg])
        dF, dG = F.grad_f(y[..., cf]), G.grad_f(y[..., cg])
        out = np.zeros(y.shape)
        for k, col in enumerate(cf):
            out[..., col] += gv * dF[..., k]
        for k, col in enumerate(cg):
            out[..., col] += fv * dG[..., k]
        return out

    compact = Smoothness.COMPACT_SUPPORT_SMOOTH
    both_compact = F.smoothness is compact and G.smoothness is compact
    bbox = None
    if both_compact:
        boxes = dict(zip(F.times, F.bbox))
        for t, (lo, hi) in zip(G.times, G.bbox):
            old = boxes.get(t, (lo, hi))
            boxes[t] = (max(lo, old[0]), min(hi, old[1]))
        bbox = tuple(boxes[t] for t in merged)
    kinks = None
    if F.kinks is not None or G.kinks is not None:
        def merged_kinks(y, active):
            y = np.asarray(y, dtype=float)
            out = []
            for H, cols in ((F, cf), (G, cg)):
                if H.kinks is not None and active[cols].any():
                    out.extend(np.ravel(H.kinks(y[cols], active[cols])))
            return np.asarray(out, dtype=float)
        kinks = merged_kinks
    return SmoothFunctional(
        merged, f, grad_f,
        smoothness=compact if both_compact else Smoothness.C1_EXTENDED,
        bbox=bbox,
        shift_invariant=F.shift_invariant and G.shift_invariant,
        check_gradient=False,
        kinks=kinks,
    )


@dataclass(frozen=True)
class LipschitzFn:
    """g with a declared Lipschitz constant and an optional continuous derivative."""

    g: Callable
    lipschitz: float
    dg: Callable | None = None

    def __post_init__(self):
        if not self.lipschitz >= 0.0:
            raise DomainError(f"Lipschitz constant must be non-negative, got {self.lipschitz}")
        rng = np.random.default_rng(0)
        a = rng.uniform(-10.0, 10.0, LIPSCHITZ_PAIRS)
        b = a + rng.uniform(-2.0, 2.0, LIPSCHITZ_PAIRS)
        lhs = np.abs(self(a) - self(b))
        rhs = self.lipschitz * np.abs(a - b) * (1.0 + 1e-6) + 1e-14
        if np.any(lhs > rhs):
            i = int(np.argmax(lhs - rhs))
            raise DomainError(
                f"|g(a) - g(b)| = {lhs[i]!r} exceeds L |a - b| at a={a[i]!r}, b={b[i]!r}"
            )

    def __call__(self, y):
        return np.asarray(self.g(np.asarray(y, dtype=float)), dtype=float)

    def derivative(self, y):
        if self.dg is None:
            raise DomainError("g has no declared derivative")
        return np.asarray(self.dg(np.asarray(y, dtype=float)), dtype=float)


def compose(g: LipschitzFn, F: SmoothFunctional) -> SmoothFunctional:
    """g(F) for continuously differentiable g."""
    if g.dg is None:
        raise DomainError("composition needs a differentiable g")

    def f(y):
        return g(F.f(y))

    def grad_f(y):
        return g.derivative(F.f(y))[..., None] * F.grad_f(y)

    return SmoothFunctional(F.times, f, grad_f, smoothness=Smoothness.C1_EXTENDED,
                            shift_invariant=F.shift_invariant, check_gradient=False,
                            kinks=F.kinks)


def product_rule_check(F: SmoothFunctional, G: SmoothFunctional, path: Path,
                       t: float, x: float) -> tuple[float, float]:
    """(D(FG), G DF + F DG + x DF DG) at (t, x) on the path."""
    lhs = eval_D(product(F, G), path, t, x)
    dF, dG = eval_D(F, path, t, x), eval_D(G, path, t, x)
    fv, gv = F.value(path), G.value(path)
    return lhs, gv * dF + fv * dG + x * dF * dG


def chain_rule_jump(g: LipschitzFn, F: Functional, path: Path, t: float, x: float) -> float:
    """[g(F + x D_{t,x}F) - g(F)] / x for x != 0."""
    if x == 0.0:
        raise DomainError("the increment quotient needs x != 0; use chain_rule_zero")
    fv = F.value(path)
    d = eval_D(F, path, t, x)
    return float((g(fv + x * d) - g(fv)) / x)


def chain_rule_zero(g: LipschitzFn, F: Functional, path: Path, t: float) -> float:
    """g'(F) D_{t,0}F for continuously differentiable g."""
    factor = float(g.derivative(F.value(path)))
    if abs(factor) > g.lipschitz + 1e-12:
        raise BoundViolationError(f"|g'(F)| = {abs(factor)!r} exceeds L_g = {g.lipschitz!r}")
    return factor * eval_D(F, path, t, 0.0)


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def _dbump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui ** 2)) * (-2.0 * ui / (1.0 - ui ** 2) ** 2)
    return out


def _mollifier_rule() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u, w = composite_nodes(-1.0, 1.0, MOLLIFIER_PANELS)
    z = float(np.dot(w, _bump(u)))
    reference = checked_integrate(_bump, -1.0, 1.0, MOLLIFIER_PANELS // 2)
    if abs(z - reference) > 1e-10 * reference:
        raise QuadratureError(f"mollifier normalization unstable: {z!r} vs {reference!r}")
    return u, w * _bump(u) / z, w * _dbump(u) / z


def mollify(g: LipschitzFn, N: int) -> LipschitzFn:
    """g_N = g * psi_N with psi_N(x) = N psi(N x) and the normalized exp bump psi.

    g_N(x) = int g(x - u/N) psi(u) du and g_N'(x) = N int g(x - u/N) psi'(u) du.
    """
    if N < 1:
        raise DomainError(f"mollifier level must be >= 1, got {N}")
    u, kernel, dkernel = _mollifier_rule()

    def apply(weights, scale):
        def fn(x):
            x = np.asarray(x, dtype=float)
            flat = x.ravel()
            out = np.empty_like(flat)
            for lo in range(0, flat.size, MOLLIFIER_CHUNK):
                block = flat[lo:lo + MOLLIFIER_CHUNK]
                values = g(block[:, None] - u[None, :] / N)
                out[lo:lo + MOLLIFIER_CHUNK] = scale * (values @ weights)
            return out.reshape(x.shape) if x.ndim else float(out[0])
        return fn

    logger.debug("mollifying with level %d on %d nodes", N, u.size)
    return LipschitzFn(apply(kernel, 1.0), g.lipschitz, apply(dkernel, float(N)))


def _jump_part(F: Functional, path: Path, mids: np.ndarray, dt: np.ndarray) -> float:
    """int int x^2 |D_{t,x}F|^2 dnu dt, cell by cell with panel doubling for densities."""
    nu = path.triplet.nu
    if nu.exact_nodes:
        x, w = nu.nodes()
        d = F.derivative_cells(path, mids, x)
        return float(dt @ (d ** 2 @ (np.asarray(w) * np.asarray(x) ** 2)))
    total = 0.0
    for t, h in zip(mids, dt):
        breaks = F.size_breakpoints(path, float(t))
        xc, wc = nu.nodes(breaks)
        xf, wf = nu.nodes(breaks, refine=2)
        d = F.derivative_cells(path, np.array([t]), np.concatenate([xc, xf]))[0] ** 2
        coarse = float(np.dot(wc * xc ** 2, d[:xc.size]))
        values = wf * xf ** 2 * d[xc.size:]
        fine = float(values.sum())
        check_doubling(coarse, fine, float(np.abs(values).sum()), f"the size axis at t={t:g}")
        total += float(h) * fine
    return total


def d12_components(F: Functional, path: Path) -> tuple[float, float, float]:
    """(|F|^2, sigma^2 int |D_{t,0}F|^2 dt, int int x^2 |D_{t,x}F|^2 dnu dt) on one path."""
    triplet = path.triplet
    v = F.value(path)
    edges = np.array(sorted({0.0} | set(F.breakpoints())))
    if edges.size < 2:
        return v * v, 0.0, 0.0
    mids = 0.5 * (edges[:-1] + edges[1:])
    dt = np.diff(edges)
    zero = 0.0
    if triplet.sigma > 0.0:
        d0 = F.derivative_cells(path, mids, np.zeros(1))[:, 0]
        zero = triplet.sigma ** 2 * float(np.dot(dt, d0 ** 2))
    return v * v, zero, _jump_part(F, path, mids, dt)



PART_NAMES = ("l2", "zero", "jump", "derivative", "full", "zero_flavor", "jump_flavor")


def _check_horizon(F: Functional, horizon: float):
    if max(F.times) > horizon:
        raise DomainError(f"horizon {horizon} is shorter than the functional's last time")


def d12_parts_mc(F: Functional, triplet: LevyTriplet, horizon: float, n_reps: int, seed: int,
                 threads: int | None = None) -> dict[str, MCEstimate]:
    """Monte Carlo estimates of every part of the D_{1,2} norm on shared paths."""
    _check_horizon(F, horizon)

    def estimator(path: Path) -> np.ndarray:
        l2, zero, jump = d12_components(F, path)
        return np.array([l2, zero, jump, zero + jump, l2 + zero + jump, l2 + zero, l2 + jump])

    estimates = mc_run_vector(estimator, n_reps, seed, triplet, horizon, F.times, threads)
    parts = dict(zip(PART_NAMES, estimates))
    offset = F.offset_stderr
    if offset > 0.0:
        # an estimated centering constant adds about 2 s sqrt(E F^2) of error to E F^2
        extra = 2.0 * offset * math.sqrt(max(parts["l2"].mean, 0.0))
        for name in ("l2", "full", "zero_flavor", "jump_flavor"):
            e = parts[name]
            parts[name] = MCEstimate(e.mean, math.hypot(e.stderr, extra), e.n, e.seed)
    return parts


FLAVOR_PART = {
    Flavor.FULL: "full",
    Flavor.ZERO_PART: "zero_flavor",
    Flavor.JUMP_PART: "jump_flavor",
}


def d12_norm_sq_mc(F: Functional, triplet: LevyTriplet, horizon: float, n_reps: int, seed: int,
                   flavor: Flavor = Flavor.FULL, threads: int | None = None) -> MCEstimate:
    """E|F|^2 plus the flavor's part of E||DF||^2_{L2(m)}."""
    return d12_parts_mc(F, triplet, horizon, n_reps, seed, threads)[FLAVOR_PART[flavor]]


def smoothstep_bump(center: float, radius: float) -> tuple[Callable, Callable]:
    """1 - s(|y - c| / r) with the cubic smoothstep s(u) = 3u^2 - 2u^3; C^1, support [c-r, c+r]."""
    if radius <= 0.0:
        raise DomainError("bump radius must be positive")

    def fn(y):
        u = np.minimum(np.abs(np.asarray(y, dtype=float) - center) / radius, 1.0)
        return 1.0 - u * u * (3.0 - 2.0 * u)

    def dfn(y):
        d = np.asarray(y, dtype=float) - center
        u = np.minimum(np.abs(d) / radius, 1.0)
        return -6.0 * u * (1.0 - u) * np.sign(d) / radius

    return fn, dfn


def tensor_bump_functional(times, centers, radii, height: float = 1.0) -> SmoothFunctional:
    """height * prod_i b_i(X_{t_i}) for cubic smoothstep bumps b_i."""
    times = tuple(float(t) for t in times)
    bumps = [smoothstep_bump(c, r) for c, r in zip(centers, radii)]
    if len(bumps) != len(times):
        raise DomainError("need one bump per time")

    def factors(y):
        y = np.asarray(y, dtype=float)
        return [fn(y[..., i]) for i, (fn, _) in enumerate(bumps)]

    def f(y):
        return height * np.prod(np.stack(factors(y)), axis=0)

    def grad_f(y):
        y = np.asarray(y, dtype=float)
        vals = factors(y)
        cols = []
        for i, (_, dfn) in enumerate(bumps):
            rest = math.prod(v for j, v in enumerate(vals) if j != i)
            cols.append(height * dfn(y[..., i]) * rest)
        return np.stack(cols, axis=-1)

    knots = np.array([(c - r, c, c + r) for c, r in zip(centers, radii)], dtype=float)

    def kinks(y, active):
        return (knots[active] - np.asarray(y, dtype=float)[active, None]).ravel()

    bbox = tuple((c - r, c + r) for c, r in zip(centers, radii))
    return SmoothFunctional(times, f, grad_f, Smoothness.COMPACT_SUPPORT_SMOOTH, bbox,
                            kinks=kinks)
