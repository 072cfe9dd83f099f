"""
Seeded multi-run execution.

Every seed gets its own agent, environment and ``default_rng(seed)``; runs
share nothing, so a seed always reproduces the same EpisodeRecords whether
it runs serially or in a worker process.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import time
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import psutil
from tqdm import tqdm

from sfkalman.agent import (
    AgentState,
    EpisodeRecord,
    PolicyKind,
    new_agent,
    refresh,
    run_episode,
    successor_prior,
)
from sfkalman.diagnostics import count_events
from sfkalman.envmodel import new_reward_model, new_transition_model
from sfkalman.envs.taskspec import TaskSpec
from sfkalman.errors import ConfigurationError
from sfkalman.harness.checkpoint import load_checkpoint, save_checkpoint
from sfkalman.harness.config import ExperimentConfig

logger = logging.getLogger(__name__)

@dataclass
class RunRecord:
    seed: int
    episodes: List[EpisodeRecord]
    step_seconds: float
    events: Dict[str, int] = field(default_factory=dict)


def checkpoint_path(directory, seed: int) -> Path:
    return Path(directory) / f"seed_{seed}.json"


def build_agent(cfg: ExperimentConfig, spec: TaskSpec) -> AgentState:
    """Fresh agent with prior beliefs for the task's feature grid and actions."""
    fm = spec.features.build(
        n_features=cfg.n_features,
        variance=cfg.rbf_variance,
        lr_mu=cfg.lr_mu,
        lr_sigma=cfg.lr_sigma,
    )
    n_actions = spec.build().n_actions
    L = fm.n_features
    rm = new_reward_model(
        n_actions,
        L,
        prior_var=cfg.reward_prior_var,
        process_noise=cfg.reward_process_noise,
        noise_vars=cfg.noise_vars(),
        aggregation=cfg.pi_aggregation,
    )
    tm = new_transition_model(
        n_actions,
        L,
        prior_scale=cfg.transition_prior_scale,
        prior_var=cfg.transition_prior_var,
        process_noise=cfg.transition_process_noise,
        measurement_noise=cfg.transition_noise,
        decay=cfg.transition_decay,
        aggregation=cfg.pi_aggregation,
    )
    successor = None
    if cfg.agent is PolicyKind.UA_TD_SF:
        successor = successor_prior(
            L, cfg.transition_prior_var, cfg.transition_process_noise, cfg.transition_noise
        )
    return new_agent(fm, rm, tm, cfg.gamma, cfg.agent, cfg.epsilon, successor)


def initial_agent(cfg: ExperimentConfig, spec: TaskSpec, seed: int) -> AgentState:
    """
    The agent a run starts from: fresh, or loaded from ``cfg.checkpoint_in``.

    A directory source holds one checkpoint per seed and each run loads its
    own seed; a file source is shared by every run. Loaded agents take the
    discount, policy and aggregation settings of ``cfg``.
    """
    if cfg.checkpoint_in is None:
        return build_agent(cfg, spec)
    source = Path(cfg.checkpoint_in)
    if source.is_dir():
        if cfg.shared_checkpoint:
            raise ConfigurationError(
                f"--shared-checkpoint expects a checkpoint file, got directory {source}"
            )
        source = checkpoint_path(source, seed)
    agent = load_checkpoint(source, n_features=cfg.n_features, n_actions=spec.build().n_actions)

    successor = agent.successor_model
    if cfg.agent is PolicyKind.UA_TD_SF and successor is None:
        logger.warning("checkpoint %s has no successor matrix; starting it from the prior", source)
        successor = successor_prior(
            agent.n_features,
            cfg.transition_prior_var,
            cfg.transition_process_noise,
            cfg.transition_noise,
        )
    agent = replace(
        agent,
        feature_map=replace(agent.feature_map, lr_mu=cfg.lr_mu, lr_sigma=cfg.lr_sigma),
        reward_model=replace(agent.reward_model, aggregation=cfg.pi_aggregation),
        transition_model=replace(agent.transition_model, aggregation=cfg.pi_aggregation),
        gamma=cfg.gamma,
        policy_kind=cfg.agent,
        epsilon=cfg.epsilon,
        successor_model=successor,
    )
    return refresh(agent)


def run_seed(seed: int, cfg: ExperimentConfig, checkpoint_dir=None) -> RunRecord:
    """
    Train one agent for ``cfg.episodes`` episodes.

    :param seed: seed of the run's random generator
    :param cfg: resolved experiment config
    :param checkpoint_dir: where to save the final agent as seed_<n>.json
    :return: RunRecord for the seed
    """
    spec = cfg.task_spec()
    env = spec.build()
    rng = np.random.default_rng(seed)
    agent = initial_agent(cfg, spec, seed)

    episodes, steps, elapsed = [], 0, 0.0
    with count_events() as counter:
        for _ in range(cfg.episodes):
            start = time.perf_counter()
            agent, record = run_episode(agent, env, cfg.episode_cap, rng, cfg.record_bound)
            elapsed += time.perf_counter() - start
            steps += record.length
            episodes.append(record)

    if checkpoint_dir is not None:
        save_checkpoint(agent, checkpoint_path(checkpoint_dir, seed))
    events = dict(sorted(counter.counts.items()))
    lengths = [record.length for record in episodes]
    logger.info(
        "seed %d on %s: mean episode length %.1f, events %s",
        seed,
        spec.name,
        float(np.mean(lengths)),
        events or "none",
    )
    return RunRecord(seed, episodes, elapsed / max(steps, 1), events)


def resolve_jobs(jobs: Union[int, str], n_seeds: int) -> int:
    n = psutil.cpu_count(logical=False) if jobs == "max" else int(jobs)
    return max(1, min(n or 1, n_seeds))


def run_experiment(
    cfg: ExperimentConfig, checkpoint_dir=None, progress: bool = True
) -> List[RunRecord]:
    """One RunRecord per seed, in the order of ``cfg.seeds``."""
    fxn = partial(run_seed, cfg=cfg, checkpoint_dir=checkpoint_dir)
    jobs = resolve_jobs(cfg.jobs, len(cfg.seeds))
    if jobs == 1:
        return [fxn(seed) for seed in tqdm(cfg.seeds, disable=not progress)]

    with mp.Pool(jobs) as pool:
        return list(
            tqdm(pool.imap(fxn, cfg.seeds), total=len(cfg.seeds), disable=not progress)
        )
