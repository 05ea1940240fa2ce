"""Remainder norms of the disjointification, the D_{1,2} flavor decomposition and the
centered-functional inequality."""
import math

import numpy as np

from ..chaos import (
    ChaosSum,
    ElementaryChaos,
    d12_norm_sq,
    l2_norm_sq,
    restricted_inner_product,
    restricted_inner_product_bruteforce,
    s2_norm_direct,
    s2_norm_formula,
)
from ..config import ExperimentConfig
from ..denseness import Partition, build_Gn, disjointify, first_integral
from ..malliavin import (
    FLAVOR_PART,
    ChaosFunctional,
    RectProduct,
    d12_components,
    d12_norm_sq_mc,
    d12_parts_mc,
)
from ..measures import Flavor, Rect, mu_measure
from ..paths import mc_run, simulate_path
from ..random_measure import bump_profile
from ..report import ResultRow
from .base import Stopwatch, aux_rng, grid_rect, random_bump_functional, rect_from_list, rect_list
from .isometry import as_tensor, time_disjoint_element


class S2NormExperiment:
    """Closed-form remainder norm against enumeration and Monte Carlo."""

    name = "s2-norm"
    description = "Remainder norm c|T|^m (1 - prod(1 - k/N)) by enumeration, trend and Monte Carlo"
    PARAMS = {
        "exact": [[2, 2], [2, 4], [2, 8], [3, 4]],
        "trend_cells": [2, 4, 8, 16, 32, 64, 128, 256],
        "trend_limit": 0.01,
        "mc_cells": [2, 4],
        "interval": [0.0, 1.0],
        "sizes": [[0.5, 1.5], [-1.0, -0.25], [-0.25, 0.25]],
        "tail": [],
        "exact_rtol": 1e-14,
    }

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        triplet = cfg.triplet
        T = tuple(float(v) for v in params["interval"])
        sizes = [tuple(float(v) for v in a) for a in params["sizes"]]
        tail = [(tuple(t), tuple(a)) for t, a in params["tail"]]
        tail_factor = math.prod(
            mu_measure(triplet, a_lo, a_hi) * (t_hi - t_lo) for (t_lo, t_hi), (a_lo, a_hi) in tail
        )
        rows = []
        for m, N in params["exact"]:
            clock = Stopwatch()
            a_list = sizes[:m]
            mus = math.prod(mu_measure(triplet, *a) for a in a_list)
            c = (m + len(tail) + 1) * mus * tail_factor
            direct = s2_norm_direct(triplet, T, a_list, tail, N)
            formula = s2_norm_formula(m, N, T[1] - T[0], c)
            rows.append(ResultRow.exact(self.name, {"m": m, "N": N, "check": "enumeration"},
                                        direct, formula, params["exact_rtol"], clock.seconds()))

        clock = Stopwatch()
        values = [s2_norm_formula(2, N, T[1] - T[0], 1.0) for N in params["trend_cells"]]
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        ratio = values[-1] / values[0]
        cells = params["trend_cells"]
        rows.append(ResultRow(self.name, {"m": 2, "check": "trend", "N": [cells[0], cells[-1]]},
                              ratio, 0.0, params["trend_limit"],
                              decreasing and ratio < params["trend_limit"], clock.seconds()))

        for N in params["mc_cells"]:
            clock = Stopwatch()
            split = disjointify(triplet, T, sizes[:2], tail, N)
            est = d12_norm_sq_mc(split.remainder(), triplet, cfg.horizon, cfg.replicates,
                                 cfg.seed)
            rows.append(ResultRow.gated(self.name, {"m": 2, "N": N, "check": "monte-carlo",
                                                    "terms": len(split.s1)},
                                        est, split.s2_norm, cfg.gate, clock.seconds()))
        return rows


def _random_chaos_sum(rng: np.random.Generator, horizon: float, terms: int) -> ChaosSum:
    elements = []
    for _ in range(terms):
        order = int(rng.integers(1, 4))
        rects = tuple(grid_rect(rng, 0.0, horizon) for _ in range(order))
        elements.append(ElementaryChaos(rects, float(rng.uniform(-1.5, 1.5))))
    return ChaosSum(tuple(elements), float(rng.uniform(-1.0, 1.0)))


class DecompositionExperiment:
    """FULL = ZERO_PART + JUMP_PART - L2, per path and on the exact chaos norms."""

    name = "d12-decomposition"
    description = "Flavor decomposition of the D_{1,2} norm, per path and by the chaos oracle"
    PARAMS = {"paths": 200, "sums": 5, "terms": 5, "order": 3, "rect": [0.0, 1.0, -0.25, 1.5],
              "rtol": 1e-12}

    def _functionals(self, cfg: ExperimentConfig, rng):
        profile = bump_profile(1.0, 0.5, 0.7)
        return {
            "bump": random_bump_functional(rng, cfg.horizon),
            "partition-sum": build_Gn(profile, Partition.uniform(0.0, 1.0, 8), cfg.triplet,
                                      seed=cfg.seed),
            "first-integral": first_integral(profile, 0.0, 1.0),
            "chaos": ChaosFunctional(as_tensor(time_disjoint_element(rng, 2, cfg.horizon))),
        }

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rng = aux_rng(cfg.seed, 5)
        rows = []
        for label, F in self._functionals(cfg, rng).items():
            clock = Stopwatch()
            worst = 0.0
            for i in range(params["paths"]):
                path = simulate_path(cfg.triplet, cfg.horizon, F.times, i, cfg.seed)
                l2, zero, jump = d12_components(F, path)
                full = l2 + zero + jump
                worst = max(worst, abs(full - ((l2 + zero) + (l2 + jump) - l2)) / (1.0 + full))
            rows.append(ResultRow.bounded(self.name, {"functional": label, "check": "per-path"},
                                          worst, params["rtol"], clock.seconds()))

        for k in range(params["sums"]):
            clock = Stopwatch()
            s = _random_chaos_sum(rng, cfg.horizon, params["terms"])
            full = d12_norm_sq(cfg.triplet, s)
            parts = (d12_norm_sq(cfg.triplet, s, Flavor.ZERO_PART)
                     + d12_norm_sq(cfg.triplet, s, Flavor.JUMP_PART)
                     - l2_norm_sq(cfg.triplet, s))
            rows.append(ResultRow.exact(self.name, {"sum": k, "check": "oracle"}, parts, full,
                                        params["rtol"], clock.seconds()))

        n = params["order"]
        e1 = ElementaryChaos(tuple(grid_rect(rng, 0.0, cfg.horizon) for _ in range(n)))
        e2 = ElementaryChaos(tuple(grid_rect(rng, 0.0, cfg.horizon) for _ in range(n)))
        for flavor in (Flavor.ZERO_PART, Flavor.JUMP_PART):
            clock = Stopwatch()
            value = restricted_inner_product(cfg.triplet, e1, e2, flavor)
            for coordinate in (0, n - 1):
                brute = restricted_inner_product_bruteforce(cfg.triplet, e1, e2, flavor,
                                                            coordinate)
                rows.append(ResultRow.exact(
                    self.name, {"flavor": flavor.value, "coordinate": coordinate,
                                "check": "symmetrization"},
                    brute, value, params["rtol"], clock.seconds(2)))

        clock = Stopwatch()
        rect = rect_from_list(params["rect"])
        parts = d12_parts_mc(RectProduct((rect,)), cfg.triplet, cfg.horizon, cfg.replicates,
                             cfg.seed)
        oracle = ChaosSum((ElementaryChaos((rect,)),))
        seconds = clock.seconds(len(FLAVOR_PART))
        for flavor, part in FLAVOR_PART.items():
            rows.append(ResultRow.gated(self.name, {"rect": rect_list(rect), "flavor": flavor.value,
                                                    "check": "monte-carlo"},
                                        parts[part], d12_norm_sq(cfg.triplet, oracle, flavor),
                                        cfg.gate, seconds))
        return rows


class CenteredInequalityExperiment:
    """E F^2 <= E ||DF||^2 for centered F, i.e. ||F||^2_{D_{1,2}} <= 2 E ||DF||^2."""

    name = "centered-inequality"
    description = "||F||^2 <= 2 ||DF||^2 for five centered functionals"
    PARAMS = {"cells": 16}

    def _functionals(self, cfg: ExperimentConfig, params: dict) -> dict:
        profile = bump_profile(1.0, 0.5, 0.7)
        b1 = Rect(0.0, 1.0, -0.25, 1.5)
        b2 = Rect(1.0, 2.0, -1.0, -0.25)
        rng = aux_rng(cfg.seed, 6)
        return {
            "M(B)": RectProduct((b1,)),
            "M(B1)M(B2)": RectProduct((b1, b2)),
            "first-integral": first_integral(profile, 0.0, 1.0),
            "partition-sum": build_Gn(profile, Partition.uniform(0.0, 1.0, params["cells"]),
                                      cfg.triplet, seed=cfg.seed),
            "chaos": ChaosFunctional(as_tensor(time_disjoint_element(rng, 2, cfg.horizon))),
        }

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rows = []
        for label, F in self._functionals(cfg, params).items():
            clock = Stopwatch()

            def excess(path, F=F):
                l2, zero, jump = d12_components(F, path)
                return l2 - zero - jump

            est = mc_run(excess, cfg.replicates, cfg.seed, cfg.triplet, cfg.horizon, F.times)
            rows.append(ResultRow.bounded(self.name, {"functional": label}, est.mean, 0.0,
                                          clock.seconds(), est.stderr, cfg.gate))
        return rows
