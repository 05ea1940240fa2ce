"""Isometry of M and exact chaos moments against Monte Carlo."""
import numpy as np

from ..chaos import ElementaryChaos, inner_product
from ..config import ExperimentConfig
from ..measures import m_intersection
from ..paths import mc_run_vector
from ..random_measure import StepKernel, TensorKernel, eval_IN, eval_M
from ..report import ResultRow
from .base import Stopwatch, aux_rng, grid_rect, rect_list


class IsometryExperiment:
    """E M(r1) M(r2) = m(r1 n r2)."""

    name = "verify-isometry"
    description = "E[M(r1)M(r2)] against m(r1 n r2) for random rectangle pairs"
    PARAMS = {"pairs": 10, "slots": 6}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rng = aux_rng(cfg.seed, 1)
        pairs = [
            (grid_rect(rng, 0.0, cfg.horizon, params["slots"]),
             grid_rect(rng, 0.0, cfg.horizon, params["slots"]))
            for _ in range(params["pairs"])
        ]
        times = {t for pair in pairs for r in pair for t in (r.t_lo, r.t_hi)}

        def estimator(path):
            return np.array([eval_M(path, r1) * eval_M(path, r2) for r1, r2 in pairs])

        clock = Stopwatch()
        estimates = mc_run_vector(estimator, cfg.replicates, cfg.seed, cfg.triplet,
                                  cfg.horizon, times)
        seconds = clock.seconds(len(pairs))
        return [
            ResultRow.gated(self.name, {"pair": i, "r1": rect_list(r1), "r2": rect_list(r2)},
                            est, m_intersection(cfg.triplet, r1, r2), cfg.gate, seconds)
            for i, ((r1, r2), est) in enumerate(zip(pairs, estimates))
        ]


def time_disjoint_element(rng: np.random.Generator, order: int, horizon: float,
                          coefficient: float = 1.0) -> ElementaryChaos:
    """Elementary chaos whose rectangles sit in consecutive time slots."""
    edges = np.linspace(0.0, horizon, order + 1)
    rects = [grid_rect(rng, float(edges[i]), float(edges[i + 1]), 2) for i in range(order)]
    return ElementaryChaos(tuple(rects), coefficient)


def as_tensor(e: ElementaryChaos) -> TensorKernel:
    return TensorKernel(tuple(StepKernel.indicator(r) for r in e.rects))


class ChaosOracleExperiment:
    """Second moments of I_n(1_{B_1 x ... x B_n}) against the permanent formula."""

    name = "chaos-oracle-vs-mc"
    description = "E[I_n^2] by Monte Carlo against the exact permanent formula, orders 1-3"
    PARAMS = {"orders": [1, 2, 3, 2, 1]}

    def execute(self, cfg: ExperimentConfig, params: dict) -> list[ResultRow]:
        rng = aux_rng(cfg.seed, 2)
        elements = [time_disjoint_element(rng, int(n), cfg.horizon) for n in params["orders"]]
        tensors = [as_tensor(e) for e in elements]
        times = {t for tk in tensors for t in tk.times()}

        def estimator(path):
            return np.array([e.coefficient * eval_IN(path, tk) for e, tk in
                             zip(elements, tensors)]) ** 2

        clock = Stopwatch()
        estimates = mc_run_vector(estimator, cfg.replicates, cfg.seed, cfg.triplet,
                                  cfg.horizon, times)
        seconds = clock.seconds(len(elements))
        rows = []
        for i, (e, est) in enumerate(zip(elements, estimates)):
            label = {"element": i, "order": e.order, "rects": [rect_list(r) for r in e.rects]}
            rows.append(ResultRow.gated(self.name, label, est,
                                        inner_product(cfg.triplet, e, e), cfg.gate, seconds))
        return rows
