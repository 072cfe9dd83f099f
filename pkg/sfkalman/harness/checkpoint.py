"""
AgentState checkpoints.

A checkpoint is a monty JSON document. Arrays go through monty's numpy
encoding, which writes float64 values with their shortest exact repr, so a
load followed by a save reproduces the file byte for byte. Fused reward
beliefs and cached Q weights are not stored; they are recomputed on load.
"""

from __future__ import annotations

import logging
import os
from typing import Any, Dict, Optional

import numpy as np
from monty.serialization import dumpfn, loadfn

from sfkalman.agent import AgentState, new_agent
from sfkalman.envmodel import RewardModel, TransitionModel
from sfkalman.errors import CheckpointError, SfkalmanError
from sfkalman.features import FeatureMap
from sfkalman.kalman import GaussianBelief, KfConfig, MatrixBelief, MmaeBank

logger = logging.getLogger(__name__)

FORMAT_VERSION = 2


def _matrix_belief_dict(mb: MatrixBelief) -> Dict[str, Any]:
    return {
        "mean": mb.mean,
        "covariance": mb.covariance,
        "process_noise_cov": mb.process_noise_cov,
        "measurement_noise_cov": mb.measurement_noise_cov,
        "decay": mb.decay,
    }


def _matrix_belief(d: Dict[str, Any]) -> MatrixBelief:
    return MatrixBelief(
        np.asarray(d["mean"], dtype=float),
        np.asarray(d["covariance"], dtype=float),
        d["process_noise_cov"],
        d["measurement_noise_cov"],
        d["decay"],
    )


def _bank_dict(bank: MmaeBank) -> Dict[str, Any]:
    return {
        "weights": bank.weights,
        "members": [
            {
                "mean": belief.mean,
                "covariance": belief.covariance,
                "evolution_matrix": cfg.evolution_matrix,
                "process_noise_cov": cfg.process_noise_cov,
                "measurement_noise_var": cfg.measurement_noise_var,
            }
            for belief, cfg in bank.members
        ],
    }


def _bank(d: Dict[str, Any]) -> MmaeBank:
    members = [
        (
            GaussianBelief(m["mean"], m["covariance"]),
            KfConfig(m["evolution_matrix"], m["process_noise_cov"], m["measurement_noise_var"]),
        )
        for m in d["members"]
    ]
    return MmaeBank(tuple(members), np.asarray(d["weights"], dtype=float))


def checkpoint_dict(agent: AgentState) -> Dict[str, Any]:
    fm, rm, tm = agent.feature_map, agent.reward_model, agent.transition_model
    return {
        "format_version": FORMAT_VERSION,
        "gamma": float(agent.gamma),
        "n_features": int(agent.n_features),
        "n_actions": int(agent.n_actions),
        "policy": agent.policy_kind.value,
        "epsilon": float(agent.epsilon),
        "features": {
            "centers": fm.centers,
            "variances": fm.variances,
            "lr_mu": float(fm.lr_mu),
            "lr_sigma": float(fm.lr_sigma),
            "dims": None if fm.dims is None else list(fm.dims),
        },
        "reward": {
            "aggregation": rm.aggregation.value,
            "theta_pi": rm.theta_pi,
            "banks": [_bank_dict(bank) for bank in rm.banks],
            "evidence": list(rm.evidence),
        },
        "transition": {
            "aggregation": tm.aggregation.value,
            "f_pi": tm.f_pi,
            "beliefs": [_matrix_belief_dict(mb) for mb in tm.beliefs],
            "evidence": list(tm.evidence),
        },
        "successor": None
        if agent.successor_model is None
        else _matrix_belief_dict(agent.successor_model),
    }


def agent_from_dict(d: Dict[str, Any]) -> AgentState:
    if d.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format_version {d.get('format_version')} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    feats = d["features"]
    fm = FeatureMap(
        np.asarray(feats["centers"], dtype=float),
        np.asarray(feats["variances"], dtype=float),
        feats["lr_mu"],
        feats["lr_sigma"],
        feats["dims"],
    )
    banks = tuple(_bank(b) for b in d["reward"]["banks"])
    rm = RewardModel(
        banks,
        tuple(bank.fused() for bank in banks),
        np.asarray(d["reward"]["theta_pi"], dtype=float),
        d["reward"]["aggregation"],
        evidence=tuple(np.asarray(e, dtype=float) for e in d["reward"]["evidence"]),
    )
    tm = TransitionModel(
        tuple(_matrix_belief(b) for b in d["transition"]["beliefs"]),
        np.asarray(d["transition"]["f_pi"], dtype=float),
        d["transition"]["aggregation"],
        evidence=tuple(np.asarray(e, dtype=float) for e in d["transition"]["evidence"]),
    )
    successor = None if d["successor"] is None else _matrix_belief(d["successor"])
    return new_agent(fm, rm, tm, d["gamma"], d["policy"], d["epsilon"], successor)


def save_checkpoint(agent: AgentState, path):
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    dumpfn(checkpoint_dict(agent), path, indent=1)


def load_checkpoint(
    path, n_features: Optional[int] = None, n_actions: Optional[int] = None
) -> AgentState:
    """
    Load an AgentState and check it against the target dimensions.

    :param path: checkpoint file
    :param n_features: expected L, or None to skip the check
    :param n_actions: expected action count, or None to skip the check
    """
    path = os.fspath(path)
    try:
        document = loadfn(path)
    except (ValueError, OSError) as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    if not isinstance(document, dict):
        raise CheckpointError(f"checkpoint {path} does not hold a JSON object")
    try:
        agent = agent_from_dict(document)
    except CheckpointError:
        raise
    except (KeyError, TypeError, SfkalmanError) as err:
        raise CheckpointError(f"malformed checkpoint {path}: {err!r}") from err
    if n_features is not None and agent.n_features != n_features:
        raise CheckpointError(
            f"checkpoint {path} has L={agent.n_features}, target task needs L={n_features}"
        )
    if n_actions is not None and agent.n_actions != n_actions:
        raise CheckpointError(
            f"checkpoint {path} has {agent.n_actions} actions, target task has {n_actions}"
        )
    logger.debug("loaded checkpoint %s (L=%d, %d actions)", path, agent.n_features, agent.n_actions)
    return agent
