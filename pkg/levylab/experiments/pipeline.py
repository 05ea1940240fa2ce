"""Smooth approximations of products of M over time-disjoint rectangles."""
import math

from ..config import ExperimentConfig
from ..denseness import (
    CutoffFn,
    grid_check_cutoff,
    grid_check_indicator,
    product_independence_check,
    theorem1_pipeline,
)
from ..random_measure import StepKernel, TensorKernel
from ..report import ResultRow, trend_rows
from .base import Stopwatch, rect_from_list


class PipelineExperiment:
    """Smoothing, partition sums and cutoff over a coarse-to-fine schedule."""

    name = "theorem1-pipeline"
    description = "D_{1,2} distance of smoothed partition-sum products to prod M(T_i x A_i)"
    PARAMS = {
        "rects": [[0.0, 1.0, 0.5, 1.5], [1.0, 2.0, -1.0, -0.25]],
        "deltas": [0.1, 0.01, 0.001],
        "meshes": [0.25, 0.0625, 0.015625],
        "cutoffs": [2.0, 4.0, 8.0],
        "ratio": 0.3,
        "knobs": True,
        "paths": 100,
        "points": 100,
        "tol": 1e-12,
        "expectation_reps": 20000,
        "variance_budget": 1e-3,
    }

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rects = [rect_from_list(r) for r in params["rects"]]
        target = TensorKernel(tuple(StepKernel.indicator(r) for r in rects))
        schedule = list(zip(params["deltas"], params["meshes"], params["cutoffs"]))

        def stage(delta, mesh, cutoff):
            return theorem1_pipeline(target, float(delta), float(mesh), float(cutoff),
                                     cfg.triplet, cfg.horizon, cfg.replicates, cfg.seed,
                                     expectation_reps=params["expectation_reps"],
                                     variance_budget=params["variance_budget"])

        steps, rows, results = [], [], []
        for delta, mesh, cutoff in schedule:
            clock = Stopwatch()
            result = stage(delta, mesh, cutoff)
            seconds = clock.seconds()
            label = {"delta": delta, "mesh": mesh, "cutoff": cutoff}
            steps.append((label, result.distance, seconds))
            results.append(result)
            rows.append(ResultRow.bounded(self.name, {**label, "check": "smoothing"},
                                          result.smoothing_error, result.slack_bound, 0.0))
            rows.append(ResultRow(self.name, {**label, "check": "smoothing-bound"},
                                  result.smoothing_bound, 0.0, None, True, 0.0))
            for i, indicator in enumerate(result.indicators):
                rows.append(ResultRow.bounded(
                    self.name, {**label, "factor": i, "check": "indicator-sandwich"},
                    grid_check_indicator(indicator), params["tol"], 0.0))
        rows = trend_rows(self.name, steps, params["ratio"]) + rows

        if params["knobs"] and len(schedule) > 1:
            rows.extend(self._knob_rows(stage, schedule, steps[0][1]))

        for cutoff in params["cutoffs"]:
            checks = grid_check_cutoff(CutoffFn(float(cutoff)))
            for key, value in checks.items():
                bound = 1.0 if key == "slope" else 0.0
                rows.append(ResultRow.bounded(self.name, {"cutoff": cutoff, "check": key},
                                              value, bound, 0.0))

        final = results[-1]
        if len(final.factors) > 1:
            clock = Stopwatch()
            report = product_independence_check(list(final.factors), cfg.triplet, cfg.horizon,
                                                params["paths"], cfg.seed, params["points"])
            seconds = clock.seconds(3)
            label = {"points": report.points}
            rows.append(ResultRow.bounded(self.name, {**label, "check": "cross-terms"},
                                          report.max_cross_term, 0.0, seconds))
            rows.append(ResultRow.bounded(self.name, {**label, "check": "product-rule"},
                                          report.max_product_rule_error, params["tol"], seconds))
            rows.append(ResultRow.gated(self.name, {**label, "check": "covariance"},
                                        report.covariance, 0.0, cfg.gate, seconds))
        return rows

    def _knob_rows(self, stage, schedule, base) -> list[ResultRow]:
        """Tighten one knob at a time from the coarse stage."""
        coarse, fine = schedule[0], schedule[-1]
        rows = []
        for k, knob in enumerate(("delta", "mesh", "cutoff")):
            clock = Stopwatch()
            settings = list(coarse)
            settings[k] = fine[k]
            est = stage(*settings).distance
            slack = 2.0 * math.hypot(base.stderr, est.stderr)
            rows.append(ResultRow(self.name, {"knob": knob, "delta": settings[0],
                                              "mesh": settings[1], "cutoff": settings[2]},
                                  est.mean, est.stderr, base.mean, est.mean <= base.mean + slack,
                                  clock.seconds()))
        return rows
