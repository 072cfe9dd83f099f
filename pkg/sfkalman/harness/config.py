"""
Experiment configuration.

Defaults come per task family from the tables below. A JSON config file may
override any subset of the keys, and explicit command-line values override
the file.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple, Union

from monty.serialization import loadfn

from sfkalman.agent import PolicyKind
from sfkalman.envmodel import PiAggregation
from sfkalman.envs.taskspec import TaskSpec, load_task
from sfkalman.errors import ConfigurationError

FORMAT_VERSION = 1
DEFAULT_SEEDS = 20

# candidate measurement-noise variances for the reward filter bank
REWARD_NOISE_CANDIDATES = (0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)

NAV_DEFAULTS = {
    "gamma": 0.95,
    "n_features": 16,
    "m_kf": 1,
    "reward_process_noise": 0.01,
    "reward_noise_var": 0.2,
    "reward_prior_var": 0.1,
    "transition_prior_scale": 0.02,
    "transition_process_noise": 0.6,
    "transition_noise": 1.0,
    "transition_prior_var": 5.0,
    "transition_decay": 0.9,
    "lr_mu": 0.001,
    "lr_sigma": 0.001,
    "epsilon": 0.2,
}

LOCK_DEFAULTS = {
    "gamma": 0.99,
    "n_features": 25,
    "m_kf": 1,
    "reward_process_noise": 0.01,
    "reward_noise_var": 0.5,
    "reward_prior_var": 1.0,
    "transition_prior_scale": 0.5,
    "transition_process_noise": 0.5,
    "transition_noise": 1.0,
    "transition_prior_var": 3.0,
    "transition_decay": 0.9,
    "lr_mu": 0.01,
    "lr_sigma": 0.005,
    "epsilon": 0.02,
}

FAMILY_DEFAULTS = {"nav": NAV_DEFAULTS, "lock": LOCK_DEFAULTS}


@dataclass
class ExperimentConfig:
    task: str
    gamma: float
    n_features: int
    m_kf: int
    reward_process_noise: float
    reward_noise_var: float
    reward_prior_var: float
    transition_prior_scale: float
    transition_process_noise: float
    transition_noise: float
    transition_prior_var: float
    transition_decay: float
    lr_mu: float
    lr_sigma: float
    epsilon: float
    episodes: int
    episode_cap: int
    reward_noise_candidates: Tuple[float, ...] = REWARD_NOISE_CANDIDATES
    rbf_variance: Optional[float] = None
    pi_aggregation: PiAggregation = PiAggregation.LAST_ACTION
    agent: PolicyKind = PolicyKind.UNCERTAINTY_AWARE
    seeds: List[int] = field(default_factory=lambda: list(range(DEFAULT_SEEDS)))
    checkpoint_in: Optional[str] = None
    shared_checkpoint: bool = False
    jobs: Union[int, str] = 1
    record_bound: bool = False

    def __post_init__(self):
        try:
            self.pi_aggregation = PiAggregation(self.pi_aggregation)
            self.agent = PolicyKind(self.agent)
        except ValueError as err:
            raise ConfigurationError(str(err)) from err
        self.seeds = [int(seed) for seed in self.seeds]
        self.reward_noise_candidates = tuple(float(v) for v in self.reward_noise_candidates)
        if self.checkpoint_in is not None:
            self.checkpoint_in = os.fspath(self.checkpoint_in)
        validate(self)

    def noise_vars(self) -> Tuple[float, ...]:
        """Measurement-noise variances of the reward filter bank members."""
        if self.m_kf == 1:
            return (self.reward_noise_var,)
        return self.reward_noise_candidates[: self.m_kf]

    def task_spec(self) -> TaskSpec:
        return load_task(self.task)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["pi_aggregation"] = self.pi_aggregation.value
        d["agent"] = self.agent.value
        d["reward_noise_candidates"] = list(self.reward_noise_candidates)
        return {"format_version": FORMAT_VERSION, **d}


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def validate(cfg: ExperimentConfig):
    if not 0 <= cfg.gamma < 1:
        raise ConfigurationError(f"gamma must lie in [0, 1), got {cfg.gamma}")
    if cfg.n_features < 1:
        raise ConfigurationError(f"n_features must be positive, got {cfg.n_features}")
    if not 1 <= cfg.m_kf <= max(1, len(cfg.reward_noise_candidates)):
        raise ConfigurationError(
            f"m_kf={cfg.m_kf} needs as many reward_noise_candidates "
            f"(have {len(cfg.reward_noise_candidates)})"
        )
    for name in (
        "reward_noise_var",
        "reward_prior_var",
        "transition_noise",
        "transition_prior_var",
        "lr_mu",
        "lr_sigma",
    ):
        if not getattr(cfg, name) > 0:
            raise ConfigurationError(f"{name} must be > 0, got {getattr(cfg, name)}")
    for name in ("reward_process_noise", "transition_process_noise"):
        if getattr(cfg, name) < 0:
            raise ConfigurationError(f"{name} must be >= 0, got {getattr(cfg, name)}")
    if not 0 < cfg.transition_decay <= 1:
        raise ConfigurationError(f"transition_decay must lie in (0, 1], got {cfg.transition_decay}")
    if not 0 <= cfg.epsilon <= 1:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {cfg.epsilon}")
    if cfg.rbf_variance is not None and not cfg.rbf_variance > 0:
        raise ConfigurationError(f"rbf_variance must be > 0, got {cfg.rbf_variance}")
    if cfg.episodes < 1 or cfg.episode_cap < 1:
        raise ConfigurationError("episodes and episode_cap must be positive")
    if not cfg.seeds:
        raise ConfigurationError("at least one seed is required")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigurationError(f"duplicate seeds in {cfg.seeds}")
    if cfg.jobs != "max" and not (isinstance(cfg.jobs, int) and cfg.jobs >= 1):
        raise ConfigurationError(f"jobs must be a positive integer or 'max', got {cfg.jobs!r}")
    if cfg.shared_checkpoint and cfg.checkpoint_in is None:
        raise ConfigurationError("shared_checkpoint needs checkpoint_in")


def load_config(path) -> Dict[str, Any]:
    """Read a config document; the result holds only ExperimentConfig keys."""
    try:
        document = loadfn(os.fspath(path))
    except ValueError as err:
        raise ConfigurationError(f"cannot parse config file {path}: {err}") from err
    if not isinstance(document, dict):
        raise ConfigurationError(f"config file {path} does not hold a JSON object")
    document = dict(document)
    version = document.pop("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"config format_version {version} is not supported (expected {FORMAT_VERSION})"
        )
    for key in document:
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"unknown config key: {key}")
    return document


def make_config(
    task: Optional[str] = None,
    config_file=None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Resolve a config from family defaults, an optional file and overrides.

    :param task: builtin task name or task file; falls back to the file's ``task``
    :param config_file: JSON config document
    :param overrides: values that win over everything else; None entries are ignored
    """
    from_file = load_config(config_file) if config_file is not None else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in overrides:
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"unknown config key: {key}")
    task = task if task is not None else from_file.get("task")
    if task is None:
        raise ConfigurationError("no task given on the command line or in the config file")

    spec = load_task(task)
    values: Dict[str, Any] = dict(FAMILY_DEFAULTS[spec.family])
    values.update(episodes=spec.episodes, episode_cap=spec.episode_cap)
    values.update(from_file)
    values.update(overrides)
    values["task"] = os.fspath(task)
    return ExperimentConfig(**values)


def for_task(task: str, **overrides) -> ExperimentConfig:
    return make_config(task, overrides=overrides)
