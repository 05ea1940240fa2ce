"""Experiment configuration files (JSON)."""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from scipy.stats import truncnorm, uniform

from .errors import ConfigError, DomainError
from .measures import AtomicJumps, DensityJumps, LevyTriplet

TOP_KEYS = {"experiment", "seed", "replicates", "horizon", "triplet", "params", "gate",
            "trend_ratio"}
REQUIRED_KEYS = {"experiment", "seed", "replicates"}
TRIPLET_KEYS = {"drift", "sigma", "jumps"}
DENSITY_KEYS = {
    "uniform": {"family", "intensity", "lo", "hi", "epsilon", "panels"},
    "truncated_normal": {"family", "intensity", "lo", "hi", "epsilon", "mean", "sd", "panels"},
}

DEFAULT_TRIPLET = {"drift": 0.0, "sigma": 1.0, "jumps": {"atoms": [[1.0, 2.0], [-0.5, 1.0]]}}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment configuration."""

    experiment: str
    seed: int
    replicates: int
    triplet: LevyTriplet
    horizon: float = 3.0
    params: dict = field(default_factory=dict)
    gate: float = 4.0
    trend_ratio: float = 0.2
    source: str = ""


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _density(section: dict):
    if not isinstance(section, dict):
        raise ConfigError("triplet.jumps.density must be an object")
    family = section.get("family")
    if family not in DENSITY_KEYS:
        raise ConfigError(f"unknown density family {family!r}")
    _reject_unknown(section, DENSITY_KEYS[family], "triplet.jumps.density")
    try:
        intensity = _number(section["intensity"], "density intensity")
        lo = _number(section["lo"], "density lo")
        hi = _number(section["hi"], "density hi")
    except KeyError as e:
        raise ConfigError(f"density is missing {e.args[0]!r}") from e
    panels = _integer(section.get("panels", 64), "density panels")
    epsilon = section.get("epsilon")
    if epsilon is not None:
        epsilon = _number(epsilon, "density epsilon")
    if family == "uniform":
        def density(x):
            return intensity * uniform.pdf(x, loc=lo, scale=hi - lo)
    else:
        mean = _number(section.get("mean", 0.5 * (lo + hi)), "density mean")
        sd = _number(section.get("sd", 1.0), "density sd")
        a, b = (lo - mean) / sd, (hi - mean) / sd

        def density(x):
            return intensity * truncnorm.pdf(x, a, b, loc=mean, scale=sd)
    return DensityJumps(density, lo, hi, panels, declared_epsilon=epsilon)


def build_triplet(section: dict) -> LevyTriplet:
    """LevyTriplet from the ``triplet`` section."""
    if not isinstance(section, dict):
        raise ConfigError("triplet must be an object")
    _reject_unknown(section, TRIPLET_KEYS, "triplet")
    jumps = section.get("jumps")
    if not isinstance(jumps, dict) or len(jumps) != 1 or not set(jumps) <= {"atoms", "density"}:
        raise ConfigError("triplet.jumps needs exactly one of 'atoms' or 'density'")
    try:
        if "atoms" in jumps:
            atoms = jumps["atoms"]
            if not isinstance(atoms, list) or not all(
                    isinstance(a, list) and len(a) == 2 for a in atoms):
                raise ConfigError("atoms must be a list of [position, intensity] pairs")
            nu = AtomicJumps.of(*((_number(p, "atom position"), _number(lam, "atom intensity"))
                                  for p, lam in atoms))
        else:
            nu = _density(jumps["density"])
        return LevyTriplet(_number(section.get("drift", 0.0), "drift"),
                           _number(section.get("sigma", 0.0), "sigma"), nu)
    except DomainError as e:
        raise ConfigError(f"invalid triplet: {e}") from e


def resolve_params(defaults: dict, given: dict, experiment: str) -> dict:
    """Experiment defaults overridden by the config's params; unknown keys rejected."""
    if not isinstance(given, dict):
        raise ConfigError("params must be an object")
    _reject_unknown(given, set(defaults), f"params of {experiment}")
    merged = dict(defaults)
    for key, value in given.items():
        default = defaults[key]
        if isinstance(default, bool) != isinstance(value, bool):
            raise ConfigError(f"param {key} must be {type(default).__name__}")
        if isinstance(default, float):
            value = _number(value, f"param {key}")
        elif isinstance(default, int) and not isinstance(default, bool):
            value = _integer(value, f"param {key}")
        elif isinstance(default, list) and not isinstance(value, list):
            raise ConfigError(f"param {key} must be a list")
        merged[key] = value
    return merged


def parse_config(doc: dict, source: str = "") -> ExperimentConfig:
    """Validate a decoded config document."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, TOP_KEYS, "config")
    missing = sorted(REQUIRED_KEYS - set(doc))
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    if not isinstance(doc["experiment"], str):
        raise ConfigError("experiment must be a string")
    seed = _integer(doc["seed"], "seed")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must lie in [0, 2^64), got {seed}")
    replicates = _integer(doc["replicates"], "replicates")
    if replicates < 2:
        raise ConfigError("replicates must be at least 2")
    horizon = _number(doc.get("horizon", 3.0), "horizon")
    if not horizon > 0.0:
        raise ConfigError("horizon must be positive")
    gate = _number(doc.get("gate", 4.0), "gate")
    trend_ratio = _number(doc.get("trend_ratio", 0.2), "trend_ratio")
    if gate <= 0.0 or trend_ratio <= 0.0:
        raise ConfigError("gate and trend_ratio must be positive")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    return ExperimentConfig(
        experiment=doc["experiment"],
        seed=seed,
        replicates=replicates,
        triplet=build_triplet(doc.get("triplet", DEFAULT_TRIPLET)),
        horizon=horizon,
        params=params,
        gate=gate,
        trend_ratio=trend_ratio,
        source=source,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return parse_config(doc, str(path))


def with_overrides(cfg: ExperimentConfig, seed: int | None = None, reps: int | None = None,
                   gate: float | None = None) -> ExperimentConfig:
    """Apply command-line overrides."""
    changes = {}
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seed must lie in [0, 2^64), got {seed}")
        changes["seed"] = seed
    if reps is not None:
        if reps < 2:
            raise ConfigError("replicates must be at least 2")
        changes["replicates"] = reps
    if gate is not None:
        if gate <= 0.0:
            raise ConfigError("gate must be positive")
        changes["gate"] = gate
    return replace(cfg, **changes)
