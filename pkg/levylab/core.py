"""Core lab orchestration."""
from pathlib import Path

from . import db
from .config import load_config, resolve_params, with_overrides
from .errors import ConfigError, DomainError, LevyLabError
from .experiments import EXPERIMENTS
from .experiments.base import Stopwatch
from .log import get_logger
from .report import write_csv

logger = get_logger(__name__)

RESULTS_DIR = "results"

# exit codes of `levylab run`
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class Lab:
    """Runs experiments and keeps the run ledger."""

    def __init__(self, project_path: Path = None):
        self.project_path = project_path or Path.cwd()

    def list_experiments(self) -> list[dict]:
        """Experiment names with one-line descriptions, in listing order."""
        return [{"name": name, "description": cls.description} for name, cls in EXPERIMENTS.items()]

    def run(self, config_path: str, seed: int = None, reps: int = None, gate: float = None,
            out: str = None) -> dict:
        """Execute the experiment a config names and write its CSV."""
        try:
            cfg = with_overrides(load_config(config_path), seed, reps, gate)
            if cfg.experiment not in EXPERIMENTS:
                raise ConfigError(f"unknown experiment {cfg.experiment!r}")
            experiment = EXPERIMENTS[cfg.experiment]()
            params = resolve_params(experiment.PARAMS, cfg.params, cfg.experiment)
        except ConfigError as e:
            return {"success": False, "error": str(e), "exit_code": EXIT_CONFIG}

        csv_path = Path(out) if out else self.project_path / RESULTS_DIR / f"{cfg.experiment}.csv"
        logger.info("running %s: seed %d, %d replicates", cfg.experiment, cfg.seed,
                    cfg.replicates)
        clock = Stopwatch()
        try:
            rows = experiment.execute(cfg, params)
        except LevyLabError as e:
            code = EXIT_CONFIG if isinstance(e, DomainError) else EXIT_FAIL
            db.record_run(cfg.experiment, str(config_path), cfg.seed, cfg.replicates,
                          status="error", error=str(e), project_path=self.project_path)
            return {"success": False, "error": f"{type(e).__name__}: {e}", "exit_code": code}

        write_csv(rows, csv_path)
        failed = [r for r in rows if not r.passed]
        db.record_run(cfg.experiment, str(config_path), cfg.seed, cfg.replicates,
                      row_count=len(rows), failed_rows=len(failed), csv_path=str(csv_path),
                      status="passed" if not failed else "failed",
                      project_path=self.project_path)
        logger.info("%s finished in %.1fs: %d rows, %d failing", cfg.experiment,
                    clock.seconds(), len(rows), len(failed))
        return {
            "success": not failed,
            "experiment": cfg.experiment,
            "rows": rows,
            "failed": len(failed),
            "csv_path": str(csv_path),
            "seconds": clock.seconds(),
            "exit_code": EXIT_PASS if not failed else EXIT_FAIL,
        }

    def history(self, limit: int = 20, experiment: str = None) -> list[dict]:
        """Recent runs from the ledger."""
        return db.get_runs(limit, experiment, project_path=self.project_path)
