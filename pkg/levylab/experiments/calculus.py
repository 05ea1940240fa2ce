"""Pathwise product and chain rules, and mollifier bounds."""
import numpy as np

from ..config import ExperimentConfig
from ..malliavin import (
    LipschitzFn,
    SmoothFunctional,
    chain_rule_jump,
    chain_rule_zero,
    compose,
    eval_D,
    mollify,
    product_rule_check,
)
from ..paths import simulate_path
from ..report import ResultRow
from .base import Stopwatch, aux_rng, random_bump_functional, sample_sizes


def _sample_points(cfg: ExperimentConfig, rng, times, paths: int, points: int, offset: int):
    """(path, t, x) triples on paths offset .. offset + paths - 1."""
    for i in range(paths):
        path = simulate_path(cfg.triplet, cfg.horizon, times, offset + i, cfg.seed)
        ts = rng.uniform(0.0, cfg.horizon, points)
        xs = sample_sizes(rng, cfg.triplet, points)
        for t, x in zip(ts, np.resize(xs, points)):
            yield path, float(t), float(x)


class ProductRuleExperiment:
    """D(FG) = G DF + F DG + x DF DG at sampled (t, x, path)."""

    name = "verify-product-rule"
    description = "Product rule for random compactly supported smooth functionals"
    PARAMS = {"pairs": 20, "paths": 50, "points": 10, "rtol": 1e-12}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rng = aux_rng(cfg.seed, 3)
        rows = []
        for p in range(params["pairs"]):
            clock = Stopwatch()
            F = random_bump_functional(rng, cfg.horizon)
            G = random_bump_functional(rng, cfg.horizon)
            times = set(F.times) | set(G.times)
            worst = 0.0
            for path, t, x in _sample_points(cfg, rng, times, params["paths"], params["points"],
                                             p * params["paths"]):
                lhs, rhs = product_rule_check(F, G, path, t, x)
                worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
            rows.append(ResultRow.bounded(self.name, {"pair": p, "F": list(F.times),
                                                      "G": list(G.times)},
                                          worst, params["rtol"], clock.seconds()))
        return rows


def _identity_functional(time: float) -> SmoothFunctional:
    return SmoothFunctional((time,), lambda y: y[..., 0], np.ones_like)


class ChainRuleExperiment:
    """Increment-quotient and Gaussian chain rules for Lipschitz g."""

    name = "verify-chain-rule"
    description = "|D g(F)| <= L_g |DF| for g=|y|; g'(F) D_{t,0}F for g=sin"
    PARAMS = {"functionals": 5, "paths": 100, "points": 20, "rtol": 1e-10}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rng = aux_rng(cfg.seed, 4)
        absolute = LipschitzFn(np.abs, 1.0)
        sine = LipschitzFn(np.sin, 1.0, np.cos)
        functionals = [_identity_functional(cfg.horizon)] + [
            random_bump_functional(rng, cfg.horizon) for _ in range(params["functionals"] - 1)
        ]
        rows = []
        for k, F in enumerate(functionals):
            clock = Stopwatch()
            composed = compose(sine, F)
            violations = 0
            zero_gap = jump_gap = 0.0
            for path, t, x in _sample_points(cfg, rng, F.times, params["paths"], params["points"],
                                             k * params["paths"]):
                if x == 0.0:
                    lhs = chain_rule_zero(sine, F, path, t)
                    zero_gap = max(zero_gap, abs(lhs - eval_D(composed, path, t, 0.0)))
                    continue
                d = eval_D(F, path, t, x)
                q = chain_rule_jump(absolute, F, path, t, x)
                if abs(q) > absolute.lipschitz * abs(d) * (1.0 + 1e-12) + 1e-14:
                    violations += 1
                q_sin = chain_rule_jump(sine, F, path, t, x)
                jump_gap = max(jump_gap, abs(q_sin - eval_D(composed, path, t, x)))
            seconds = clock.seconds(3)
            label = {"functional": k, "times": list(F.times)}
            rows.append(ResultRow.exact(self.name, {**label, "check": "jump-bound"},
                                        float(violations), 0.0, 0.0, seconds))
            rows.append(ResultRow.bounded(self.name, {**label, "check": "zero-part"},
                                          zero_gap, params["rtol"], seconds))
            rows.append(ResultRow.bounded(self.name, {**label, "check": "jump-compose"},
                                          jump_gap, params["rtol"], seconds))
        return rows


class MollifierExperiment:
    """||g_N - g|| <= L/N and ||g_N'|| <= L on a grid."""

    name = "mollifier-bounds"
    description = "Mollified |y| within L/N with slope at most L; affine maps preserved"
    PARAMS = {"levels": [2, 8, 32], "grid": 10000, "extent": 3.0, "linear_tol": 1e-10,
              "slope_rtol": 1e-6}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        y = np.linspace(-params["extent"], params["extent"], params["grid"])
        absolute = LipschitzFn(np.abs, 1.0)
        affine = LipschitzFn(lambda v: 2.0 * v + 1.0, 2.0, lambda v: np.full_like(v, 2.0))
        rows = []
        for N in params["levels"]:
            clock = Stopwatch()
            smooth = mollify(absolute, int(N))
            gap = float(np.max(np.abs(smooth(y) - absolute(y))))
            slope = float(np.max(np.abs(smooth.derivative(y))))
            lin = mollify(affine, int(N))
            lin_gap = float(np.max(np.abs(lin(y) - affine(y)) / (1.0 + np.abs(affine(y)))))
            seconds = clock.seconds(3)
            rows.append(ResultRow.bounded(self.name, {"N": N, "check": "sup-distance"},
                                          gap, absolute.lipschitz / N, seconds))
            slope_bound = absolute.lipschitz * (1.0 + params["slope_rtol"])
            rows.append(ResultRow.bounded(self.name, {"N": N, "check": "sup-slope"},
                                          slope, slope_bound, seconds))
            rows.append(ResultRow.bounded(self.name, {"N": N, "check": "affine"},
                                          lin_gap, params["linear_tol"], seconds))
        return rows
