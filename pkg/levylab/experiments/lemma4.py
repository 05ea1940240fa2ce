"""Partition-sum approximations of first integrals."""
import math

from ..config import ExperimentConfig
from ..denseness import (
    build_Gn,
    d12_distance_parts,
    dyadic_schedule,
    first_integral,
    lemma4_error_terms,
    pure_jump_distance_oracle,
)
from ..errors import DomainError
from ..log import get_logger
from ..random_measure import bump_profile
from ..report import ResultRow, trend_rows
from .base import Stopwatch

logger = get_logger(__name__)

PROFILE_PARAMS = {"center": 1.0, "half_width": 0.5, "height": 0.7, "interval": [0.0, 1.0]}


def _setup(params: dict):
    profile = bump_profile(params["center"], params["half_width"], params["height"])
    s, u = (float(v) for v in params["interval"])
    return profile, s, u, dyadic_schedule(s, u, tuple(params["exponents"]))


class Lemma4ConvergenceExperiment:
    """||I_1(1_T phi) - G^n||^2 in D_{1,2} over a dyadic mesh schedule."""

    name = "lemma4-convergence"
    description = "D_{1,2} distance of partition sums to I_1(1_T phi) over meshes 4^-1..4^-4"
    PARAMS = {**PROFILE_PARAMS, "exponents": [2, 4, 6, 8]}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        profile, s, u, partitions = _setup(params)
        target = first_integral(profile, s, u)
        steps, oracle_rows = [], []
        for partition in partitions:
            clock = Stopwatch()
            G = build_Gn(profile, partition, cfg.triplet, seed=cfg.seed)
            parts = d12_distance_parts(target, G, cfg.triplet, cfg.horizon, cfg.replicates,
                                       cfg.seed)
            seconds = clock.seconds()
            label = {"mesh": partition.mesh, "cells": len(partition.widths)}
            steps.append((label, parts["full"], seconds))
            try:
                value, derivative = pure_jump_distance_oracle(profile, partition, cfg.triplet)
            except DomainError:
                continue
            oracle_rows.append(ResultRow.gated(self.name, {**label, "check": "pure-jump-oracle"},
                                               parts["full"], value + derivative, cfg.gate,
                                               seconds))
        rows = trend_rows(self.name, steps, cfg.trend_ratio) + oracle_rows

        first, last = steps[0], steps[-1]
        if first[1].mean > 0.0 and last[1].mean > 0.0:
            rate = math.log(first[1].mean / last[1].mean) / math.log(
                first[0]["mesh"] / last[0]["mesh"])
            logger.info("%s: empirical rate %.3f in the mesh", self.name, rate)
            rows.append(ResultRow(self.name, {"check": "empirical-rate"}, rate, 0.0, None, True,
                                  0.0))
        return rows


class Lemma4ErrorTermsExperiment:
    """The zero and jump error integrals separately, with their dominating bounds."""

    name = "lemma4-error-terms"
    description = "Zero-part and jump-part error integrals of G^n, dominated pathwise"
    PARAMS = {**PROFILE_PARAMS, "exponents": [2, 4, 6], "rtol": 1e-10}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        profile, s, u, partitions = _setup(params)
        target = first_integral(profile, s, u)
        zero_steps, jump_steps, rows = [], [], []
        for partition in partitions:
            clock = Stopwatch()
            terms = lemma4_error_terms(profile, partition, cfg.triplet, cfg.horizon,
                                       cfg.replicates, cfg.seed)
            G = build_Gn(profile, partition, cfg.triplet, seed=cfg.seed)
            parts = d12_distance_parts(target, G, cfg.triplet, cfg.horizon, cfg.replicates,
                                       cfg.seed)
            seconds = clock.seconds(2)
            label = {"mesh": partition.mesh, "cells": len(partition.widths)}
            zero_steps.append(({**label, "part": "zero"}, terms.zero_part, seconds))
            jump_steps.append(({**label, "part": "jump"}, terms.jump_part, seconds))
            rows.append(ResultRow.exact(self.name, {**label, "check": "derivative-part"},
                                        parts["derivative"].mean,
                                        terms.zero_part.mean + terms.jump_part.mean,
                                        params["rtol"], seconds))
        return (trend_rows(self.name, zero_steps, cfg.trend_ratio, {"part": "zero"})
                + trend_rows(self.name, jump_steps, cfg.trend_ratio, {"part": "jump"}) + rows)
