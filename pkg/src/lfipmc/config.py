"""Experiment configuration: a flat, sectioned key=value document.

``parse_config`` rejects duplicate keys, unknown sections and unknown keys,
and reports every validation problem at once rather than stopping at the
first. ``serialize_config`` emits a full echo of the resolved values so
that parse(serialize(cfg)) round-trips to an equal config.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields

from .exceptions import ParseError, ValidationError

KINDS = ("weight-comparison", "pmc-convergence", "smc-vs-mcpmc", "single-run")
ESTIMATORS = ("exact", "mcpmc", "lfire", "smc-abc")
KL_DIRECTIONS = ("exact-to-estimate", "estimate-to-exact")

DEFAULT_SMC_SCHEDULE = (12.0, 9.0, 7.0, 5.5, 4.5, 3.75, 3.25, 2.85, 2.55, 2.3)


@dataclass
class ExperimentConfig:
    """Validated experiment settings with spec defaults."""

    kind: str = "single-run"
    seed: int = 0
    replicates: int = 10
    output_dir: str = "out"
    threads: int = 0                       # 0 = use available cores

    true_mean: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    prior_lower: float = -20.0
    prior_upper: float = 20.0
    observed: str = ""                     # optional CSV path (single-run only)

    pmc_particles: int = 50
    pmc_sims_per_particle: int = 100
    pmc_iterations: int = 10
    stop_window: int = 10
    stop_threshold: float = 0.0            # 0 disables early stopping
    estimator: str = "mcpmc"
    l1_strength: float = 0.0
    quadratic_features: bool = False
    marginal_sims: int = 0                 # 0 = automatic (N*M/2 capped)
    fit_iterations: int = 500
    fit_tolerance: float = 1e-8

    smc_particles: int = 500
    smc_schedule: tuple = DEFAULT_SMC_SCHEDULE
    max_attempts: int = 100_000

    particle_counts: tuple = (10, 25, 50)
    kl_direction: str = "exact-to-estimate"


_SCHEMA = {
    "experiment": {
        "kind": str,
        "seed": int,
        "replicates": int,
        "output_dir": str,
        "threads": int,
    },
    "model": {
        "true_mean": "float_list",
        "prior_lower": float,
        "prior_upper": float,
        "observed": str,
    },
    "pmc": {
        "particles": int,
        "sims_per_particle": int,
        "iterations": int,
        "stop_window": int,
        "stop_threshold": float,
        "estimator": str,
        "l1_strength": float,
        "quadratic_features": bool,
        "marginal_sims": int,
        "fit_iterations": int,
        "fit_tolerance": float,
    },
    "smc": {
        "particles": int,
        "schedule": "float_list",
        "max_attempts": int,
    },
    "study": {
        "particle_counts": "int_list",
        "kl_direction": str,
    },
}

# (section, key) -> ExperimentConfig field name
_FIELD_OF = {
    ("experiment", "kind"): "kind",
    ("experiment", "seed"): "seed",
    ("experiment", "replicates"): "replicates",
    ("experiment", "output_dir"): "output_dir",
    ("experiment", "threads"): "threads",
    ("model", "true_mean"): "true_mean",
    ("model", "prior_lower"): "prior_lower",
    ("model", "prior_upper"): "prior_upper",
    ("model", "observed"): "observed",
    ("pmc", "particles"): "pmc_particles",
    ("pmc", "sims_per_particle"): "pmc_sims_per_particle",
    ("pmc", "iterations"): "pmc_iterations",
    ("pmc", "stop_window"): "stop_window",
    ("pmc", "stop_threshold"): "stop_threshold",
    ("pmc", "estimator"): "estimator",
    ("pmc", "l1_strength"): "l1_strength",
    ("pmc", "quadratic_features"): "quadratic_features",
    ("pmc", "marginal_sims"): "marginal_sims",
    ("pmc", "fit_iterations"): "fit_iterations",
    ("pmc", "fit_tolerance"): "fit_tolerance",
    ("smc", "particles"): "smc_particles",
    ("smc", "schedule"): "smc_schedule",
    ("smc", "max_attempts"): "max_attempts",
    ("study", "particle_counts"): "particle_counts",
    ("study", "kl_direction"): "kl_direction",
}

_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}


def _convert(kind, raw: str, where: str, problems: list):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if math.isnan(value):
                raise ValueError("nan is not allowed")
            return value
        if kind is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError(f"expected a boolean, got {raw!r}")
            return _BOOL_WORDS[raw.lower()]
        if kind == "float_list":
            return tuple(float(part) for part in raw.split(",") if part.strip() != "")
        if kind == "int_list":
            return tuple(int(part) for part in raw.split(",") if part.strip() != "")
        return raw
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document.

    Raises :class:`ParseError` for syntax problems (including duplicate
    keys) and :class:`ValidationError` listing every violated constraint.
    """
    parser = configparser.ConfigParser(
        interpolation=None, strict=True, default_section="__never__"
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc

    problems: list[str] = []
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key '{key}' in section [{section}]")
                continue
            converted = _convert(_SCHEMA[section][key], raw, f"[{section}] {key}", problems)
            if converted is not None:
                values[_FIELD_OF[(section, key)]] = converted

    cfg = ExperimentConfig(**values)
    problems.extend(validate_config(cfg))
    if problems:
        raise ValidationError(problems)
    return cfg


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Return the list of constraint violations (empty when valid)."""
    problems = []
    if cfg.kind not in KINDS:
        problems.append(f"[experiment] kind must be one of {', '.join(KINDS)}; got {cfg.kind!r}")
    if cfg.replicates < 1:
        problems.append("[experiment] replicates must be >= 1")
    if cfg.threads < 0:
        problems.append("[experiment] threads must be >= 0")
    if len(cfg.true_mean) < 1:
        problems.append("[model] true_mean must have at least one component")
    if not cfg.prior_lower < cfg.prior_upper:
        problems.append("[model] prior_lower must be strictly below prior_upper")
    if cfg.observed and cfg.kind != "single-run":
        problems.append("[model] observed data injection is only supported for single-run")
    if cfg.pmc_particles < 2:
        problems.append("[pmc] particles must be >= 2")
    if cfg.pmc_sims_per_particle < 1:
        problems.append("[pmc] sims_per_particle must be >= 1")
    if cfg.pmc_iterations < 2:
        problems.append("[pmc] iterations must be >= 2")
    if cfg.stop_window < 2:
        problems.append("[pmc] stop_window must be >= 2")
    if cfg.stop_threshold < 0:
        problems.append("[pmc] stop_threshold must be >= 0")
    if cfg.estimator not in ESTIMATORS:
        problems.append(f"[pmc] estimator must be one of {', '.join(ESTIMATORS)}; got {cfg.estimator!r}")
    if cfg.l1_strength < 0:
        problems.append("[pmc] l1_strength must be >= 0")
    if cfg.marginal_sims < 0:
        problems.append("[pmc] marginal_sims must be >= 0")
    if cfg.fit_iterations < 1:
        problems.append("[pmc] fit_iterations must be >= 1")
    if cfg.fit_tolerance <= 0:
        problems.append("[pmc] fit_tolerance must be positive")
    if cfg.smc_particles < 2:
        problems.append("[smc] particles must be >= 2")
    if len(cfg.smc_schedule) < 1:
        problems.append("[smc] schedule must not be empty")
    else:
        if any(e <= 0 for e in cfg.smc_schedule):
            problems.append("[smc] all schedule tolerances must be positive")
        if any(b > a for a, b in zip(cfg.smc_schedule, cfg.smc_schedule[1:])):
            problems.append("[smc] schedule must be non-increasing")
    if cfg.max_attempts < 1:
        problems.append("[smc] max_attempts must be >= 1")
    if len(cfg.particle_counts) < 1:
        problems.append("[study] particle_counts must not be empty")
    elif any(c < 2 for c in cfg.particle_counts):
        problems.append("[study] all particle_counts must be >= 2")
    if cfg.kl_direction not in KL_DIRECTIONS:
        problems.append(f"[study] kl_direction must be one of {', '.join(KL_DIRECTIONS)}")
    return problems


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full echo of the configuration in the accepted input format."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, _FIELD_OF[(section, key)])
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
