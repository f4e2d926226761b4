"""Experiment configuration: a line-oriented key = value format.

Lines are ``key = value`` with ``#`` comments; unknown keys, bad types and
out-of-range values are rejected with the offending line number.  Every
key has a default, so an empty file is a valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .graphs import parse_edge_list


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        if line:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class ExperimentConfig:
    # environment
    env: str = "mountaincar"
    agents: int = 3
    horizon: int = 100
    gamma: float = 0.999
    goal_positions: str = "0.45"
    tabular_file: str = "builtin"
    # communication graph
    graph: str = "complete"
    edges: str = ""
    # policy
    policy: str = "gaussian_mlp"
    hidden: int = 64
    policy_sigma: float = 0.5
    # estimators
    batch_M: int = 10
    minibatch_B: int = 5
    baseline_b: float = 0.0
    iw_log_cap: float = 20.0
    # optimizer
    variant: str = "dgt_svrpg"
    epochs_S: int = 20
    epoch_len_K: int = 2
    alpha: float = 0.0025
    adam: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hetero_init: bool = False
    oracle_gradients: bool = False
    seed: int = 0
    repetitions: int = 1
    # harness
    out_dir: str = "out"
    eval_rollouts: int = 10
    eval_every: int = 1
    backend: str = "auto"


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False}

_CHOICES = {
    "env": ("mountaincar", "tabular"),
    "graph": ("complete", "ring", "star", "custom"),
    "policy": ("gaussian_mlp", "tabular"),
    "variant": ("dgt_svrpg", "d_gpomdp", "dgt_gpomdp"),
    "backend": ("auto", "python", "compiled"),
}

_POSITIVE_INT = ("agents", "horizon", "batch_M", "minibatch_B", "epochs_S",
                 "epoch_len_K", "repetitions", "eval_rollouts", "eval_every")
_NONNEG_INT = ("seed", "hidden")
_POSITIVE_FLOAT = ("alpha", "policy_sigma", "iw_log_cap", "adam_eps")
_UNIT_OPEN_FLOAT = ("gamma", "adam_beta1", "adam_beta2")


def _convert(name: str, text: str, target_type, line: int):
    if target_type is bool:
        word = text.lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(f"{name} expects true/false, got {text!r}", line)
        return _BOOL_WORDS[word]
    try:
        return target_type(text)
    except ValueError:
        raise ConfigError(f"{name} expects {target_type.__name__}, got {text!r}", line) from None


def _validate(cfg: ExperimentConfig, lines: dict):
    def fail(key, message):
        raise ConfigError(f"{key} {message}", lines.get(key, 0))

    for key, options in _CHOICES.items():
        if getattr(cfg, key) not in options:
            fail(key, f"must be one of {options}, got {getattr(cfg, key)!r}")
    for key in _POSITIVE_INT:
        if getattr(cfg, key) < 1:
            fail(key, "must be >= 1")
    for key in _NONNEG_INT:
        if getattr(cfg, key) < 0:
            fail(key, "must be >= 0")
    for key in _POSITIVE_FLOAT:
        if getattr(cfg, key) <= 0:
            fail(key, "must be positive")
    for key in _UNIT_OPEN_FLOAT:
        if not 0.0 < getattr(cfg, key) < 1.0:
            fail(key, "must lie strictly between 0 and 1")
    if cfg.graph == "custom":
        if not cfg.edges:
            fail("edges", "required for graph = custom")
        try:
            parse_edge_list(cfg.edges)
        except ValueError as exc:
            fail("edges", str(exc))
    if cfg.env == "mountaincar" and cfg.policy != "gaussian_mlp":
        fail("policy", "must be gaussian_mlp for the mountaincar environment")
    if cfg.env == "tabular" and cfg.policy != "tabular":
        fail("policy", "must be tabular for the tabular environment")
    if cfg.oracle_gradients and cfg.env != "tabular":
        fail("oracle_gradients", "requires env = tabular")
    if cfg.goal_positions:
        try:
            values = [float(v) for v in cfg.goal_positions.split(",")]
        except ValueError:
            fail("goal_positions", f"expects comma-separated floats, got {cfg.goal_positions!r}")
        if len(values) not in (1, cfg.agents):
            fail("goal_positions", f"expects 1 or {cfg.agents} values, got {len(values)}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a configuration document."""
    cfg = ExperimentConfig()
    # infer the concrete type of each key from its default value
    real_types = {f.name: type(getattr(cfg, f.name)) for f in fields(ExperimentConfig)}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in real_types:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if not value:
            raise ConfigError(f"{key} has no value", lineno)
        setattr(cfg, key, _convert(key, value, real_types[key], lineno))
        lines[key] = lineno
    _validate(cfg, lines)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: ExperimentConfig) -> str:
    """Render the effective configuration back to the file format."""
    out = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if value == "":
            continue  # empty strings (unused optional keys) cannot round-trip
        if isinstance(value, bool):
            value = "true" if value else "false"
        out.append(f"{f.name} = {value}")
    return "\n".join(out) + "\n"


def goal_position_list(cfg: ExperimentConfig):
    values = [float(v) for v in cfg.goal_positions.split(",")]
    if len(values) == 1:
        return values[0]
    return values
