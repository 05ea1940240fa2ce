"""Result rows, pass/fail gates and the CSV output format."""
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .paths import MCEstimate

CSV_HEADER = ["experiment", "params", "estimate", "stderr", "target", "pass", "seconds"]


@dataclass(frozen=True)
class ResultRow:
    """One measured quantity with its verdict."""

    experiment: str
    params: dict
    estimate: float
    stderr: float
    target: float | None
    passed: bool
    seconds: float

    @classmethod
    def gated(cls, experiment: str, params: dict, est: MCEstimate, target: float, k: float,
              seconds: float) -> "ResultRow":
        """Pass iff |estimate - target| <= k stderr."""
        return cls(experiment, params, est.mean, est.stderr, target,
                   abs(est.mean - target) <= k * est.stderr, seconds)

    @classmethod
    def exact(cls, experiment: str, params: dict, value: float, target: float, rtol: float,
              seconds: float) -> "ResultRow":
        """Pass iff |value - target| <= rtol |target|; a zero target needs an exact zero."""
        ok = math.isfinite(value) and abs(value - target) <= rtol * abs(target)
        return cls(experiment, params, value, 0.0, target, ok, seconds)

    @classmethod
    def bounded(cls, experiment: str, params: dict, value: float, bound: float, seconds: float,
                stderr: float = 0.0, k: float = 0.0) -> "ResultRow":
        """Pass iff value <= bound + k stderr."""
        return cls(experiment, params, value, stderr, bound, value <= bound + k * stderr, seconds)


def trend_rows(experiment: str, steps: list[tuple[dict, MCEstimate, float]],
               ratio: float, label: dict | None = None) -> list[ResultRow]:
    """Rows for a convergence sequence.

    A step passes when it does not exceed its predecessor by more than twice
    their combined standard error; a closing row compares final over first
    with the ratio threshold and passes only if every step passed.
    """
    rows = []
    previous = None
    all_ok = True
    for params, est, seconds in steps:
        ok = True
        if previous is not None:
            slack = 2.0 * math.hypot(previous.stderr, est.stderr)
            ok = est.mean <= previous.mean + slack
        all_ok = all_ok and ok
        rows.append(ResultRow(experiment, params, est.mean, est.stderr, None, ok, seconds))
        previous = est
    first, last = steps[0][1].mean, steps[-1][1].mean
    observed = last / first if first > 0.0 else 0.0
    closing = {**(label or {}), "trend": "final/first"}
    rows.append(ResultRow(experiment, closing, observed, 0.0, ratio,
                          all_ok and observed <= ratio, 0.0))
    return rows


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (int, str)):
        return str(value)
    return json.dumps(value, separators=(",", ":"))


def format_params(params: dict) -> str:
    """k=v;k=v in insertion order."""
    return ";".join(f"{k}={_format_value(v)}" for k, v in params.items())


def format_row(row: ResultRow) -> list[str]:
    return [
        row.experiment,
        format_params(row.params),
        format(row.estimate, ".17g"),
        format(row.stderr, ".17g"),
        "" if row.target is None else format(row.target, ".17g"),
        "true" if row.passed else "false",
        format(row.seconds, ".3f"),
    ]


def write_csv(rows: list[ResultRow], path: str | Path) -> Path:
    """Write rows with the fixed header; UTF-8, comma separated."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(format_row(r) for r in rows)
    return path


def read_csv(path: str | Path) -> list[dict]:
    """Read a results file back as dicts keyed by the header."""
    with Path(path).open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return list(reader)
