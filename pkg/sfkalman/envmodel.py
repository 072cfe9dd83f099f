"""
Per-action reward and transition models built on the filters in
:mod:`sfkalman.kalman`, plus the policy-level parameters theta^pi and F^pi
and the exploration bonuses.

Besides the tracking filters, each model keeps a per-action evidence
covariance: the posterior the filter would hold with no evolution step
(G = I, P^w = 0, decay 1). It shrinks only where an action has been
measured and never grows with time or with use elsewhere, so it measures
how often an action has been tried in states like the current one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from sfkalman.errors import ConfigurationError, ValidationError
from sfkalman.kalman import (
    DEFAULT_DECAY,
    GaussianBelief,
    MatrixBelief,
    MmaeBank,
    kf_update,
    matrix_kf_update,
    mmae_step,
    random_walk_config,
)


class PiAggregation(str, Enum):
    LAST_ACTION = "last_action"
    UNIFORM = "uniform"


def _check_action(a, n_actions):
    if not 0 <= a < n_actions:
        raise ValidationError(f"action {a} outside [0, {n_actions})")


def _swap(items: tuple, index: int, item) -> tuple:
    return items[:index] + (item,) + items[index + 1 :]


def _evidence_update(covariance: np.ndarray, h: np.ndarray, noise_var: float) -> np.ndarray:
    prior = GaussianBelief(np.zeros(len(h)), covariance)
    posterior, _, _ = kf_update(prior, h, 0.0, noise_var)
    return posterior.covariance


def _input_factor(mb: MatrixBelief) -> np.ndarray:
    """L x L covariance over the input direction of F (P of P kron I)."""
    L = mb.n_features
    if mb.covariance.shape[0] == L:
        return mb.covariance
    return float(np.trace(mb.covariance)) / (L * L) * np.eye(L)


def _mean_noise(noise) -> float:
    if np.ndim(noise) == 0:
        return float(noise)
    return float(np.mean(np.diag(noise)))


@dataclass(frozen=True, eq=False)
class RewardModel:
    banks: Tuple[MmaeBank, ...]
    fused: Tuple[GaussianBelief, ...]
    theta_pi: np.ndarray
    aggregation: PiAggregation = PiAggregation.LAST_ACTION
    max_residual: float = 0.0
    evidence: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        if len(self.banks) != len(self.fused) or not self.banks:
            raise ConfigurationError("reward model needs one fused belief per action bank")
        object.__setattr__(self, "banks", tuple(self.banks))
        object.__setattr__(self, "fused", tuple(self.fused))
        object.__setattr__(self, "aggregation", PiAggregation(self.aggregation))
        if self.evidence is None:
            evidence = tuple(belief.covariance for belief in self.fused)
        else:
            evidence = tuple(np.asarray(e, dtype=float) for e in self.evidence)
        L = self.n_features
        if len(evidence) != len(self.banks) or any(e.shape != (L, L) for e in evidence):
            raise ConfigurationError(f"reward evidence needs one {L} x {L} covariance per action")
        object.__setattr__(self, "evidence", evidence)

    @property
    def n_actions(self) -> int:
        return len(self.banks)

    @property
    def n_features(self) -> int:
        return self.fused[0].dim

    @property
    def evidence_noise(self) -> float:
        """Measurement noise of the evidence update: the bank's mean P^N."""
        return float(np.mean([cfg.measurement_noise_var for _, cfg in self.banks[0].members]))

    def theta(self, a: int) -> np.ndarray:
        return self.fused[a].mean


@dataclass(frozen=True, eq=False)
class TransitionModel:
    beliefs: Tuple[MatrixBelief, ...]
    f_pi: np.ndarray
    aggregation: PiAggregation = PiAggregation.LAST_ACTION
    max_residual: float = 0.0
    evidence: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        if not self.beliefs:
            raise ConfigurationError("transition model needs at least one action")
        object.__setattr__(self, "beliefs", tuple(self.beliefs))
        object.__setattr__(self, "aggregation", PiAggregation(self.aggregation))
        if self.evidence is None:
            evidence = tuple(_input_factor(mb) for mb in self.beliefs)
        else:
            evidence = tuple(np.asarray(e, dtype=float) for e in self.evidence)
        L = self.n_features
        if len(evidence) != len(self.beliefs) or any(e.shape != (L, L) for e in evidence):
            raise ConfigurationError(f"transition evidence needs one {L} x {L} factor per action")
        object.__setattr__(self, "evidence", evidence)

    @property
    def n_actions(self) -> int:
        return len(self.beliefs)

    @property
    def n_features(self) -> int:
        return self.beliefs[0].n_features

    @property
    def evidence_noise(self) -> float:
        return _mean_noise(self.beliefs[0].measurement_noise_cov)


def new_reward_model(
    n_actions: int,
    n_features: int,
    *,
    prior_var: float,
    process_noise: float,
    noise_vars: Sequence[float],
    aggregation: PiAggregation = PiAggregation.LAST_ACTION,
) -> RewardModel:
    """
    Zero-mean priors for every action; one bank member per entry of
    ``noise_vars`` (M_KF = len(noise_vars)), weights 1 / M_KF.
    """
    if not noise_vars:
        raise ConfigurationError("at least one measurement noise variance is required")
    prior = GaussianBelief(np.zeros(n_features), prior_var * np.eye(n_features))
    bank = MmaeBank.uniform(
        [(prior, random_walk_config(n_features, process_noise, nv)) for nv in noise_vars]
    )
    fused = bank.fused()
    return RewardModel(
        (bank,) * n_actions, (fused,) * n_actions, fused.mean, aggregation
    )


def new_transition_model(
    n_actions: int,
    n_features: int,
    *,
    prior_scale: float,
    prior_var: float,
    process_noise: float,
    measurement_noise: float,
    decay: float = DEFAULT_DECAY,
    aggregation: PiAggregation = PiAggregation.LAST_ACTION,
) -> TransitionModel:
    belief = MatrixBelief(
        prior_scale * np.eye(n_features),
        prior_var * np.eye(n_features),
        process_noise,
        measurement_noise,
        decay,
    )
    return TransitionModel((belief,) * n_actions, belief.mean, aggregation)


def observe_reward(rm: RewardModel, phi_s, a: int, r: float) -> RewardModel:
    _check_action(a, rm.n_actions)
    phi_s = np.asarray(phi_s, dtype=float)
    residual = abs(r - phi_s @ rm.theta(a))
    bank, fused = mmae_step(rm.banks[a], phi_s, r)
    fused_all = _swap(rm.fused, a, fused)
    if rm.aggregation is PiAggregation.LAST_ACTION:
        theta_pi = fused.mean
    else:
        theta_pi = np.mean([belief.mean for belief in fused_all], axis=0)
    evidence = _evidence_update(rm.evidence[a], phi_s, rm.evidence_noise)
    return replace(
        rm,
        banks=_swap(rm.banks, a, bank),
        fused=fused_all,
        theta_pi=theta_pi,
        max_residual=max(rm.max_residual, float(residual)),
        evidence=_swap(rm.evidence, a, evidence),
    )


def observe_transition(tm: TransitionModel, phi_s, a: int, phi_s_next) -> TransitionModel:
    _check_action(a, tm.n_actions)
    phi_s = np.asarray(phi_s, dtype=float)
    phi_s_next = np.asarray(phi_s_next, dtype=float)
    residual = np.linalg.norm(phi_s_next - tm.beliefs[a].mean @ phi_s)
    belief = matrix_kf_update(tm.beliefs[a], phi_s, phi_s_next)
    beliefs = _swap(tm.beliefs, a, belief)
    if tm.aggregation is PiAggregation.LAST_ACTION:
        f_pi = belief.mean
    else:
        f_pi = np.mean([b.mean for b in beliefs], axis=0)
    evidence = _evidence_update(tm.evidence[a], phi_s, tm.evidence_noise)
    return replace(
        tm,
        beliefs=beliefs,
        f_pi=f_pi,
        max_residual=max(tm.max_residual, float(residual)),
        evidence=_swap(tm.evidence, a, evidence),
    )


def predicted_reward(rm: RewardModel, phi_s, a: int) -> float:
    _check_action(a, rm.n_actions)
    return float(np.asarray(phi_s) @ rm.theta(a))


def predicted_next_features(tm: TransitionModel, phi_s, a: int) -> np.ndarray:
    _check_action(a, tm.n_actions)
    return tm.beliefs[a].mean @ np.asarray(phi_s)


def exploration_bonus(rm: RewardModel, tm: TransitionModel, a: int) -> float:
    """tr(Pi^a) + tr(S^a)"""
    _check_action(a, rm.n_actions)
    return float(np.trace(rm.fused[a].covariance)) + tm.beliefs[a].covariance_trace()


def reward_variance(rm: RewardModel, phi_s, a: int) -> float:
    """phi' E^a phi: evidence variance of the predicted reward of a at s."""
    _check_action(a, rm.n_actions)
    phi_s = np.asarray(phi_s, dtype=float)
    return float(phi_s @ rm.evidence[a] @ phi_s)


def state_bonus(rm: RewardModel, tm: TransitionModel, phi_s, a: int, v, gamma: float) -> float:
    """
    Standard deviation of Q(s, a) = theta^a' phi + gamma v' F^a phi under the
    evidence covariances.

    :param phi_s: features of the current state
    :param a: action
    :param v: value weights, V(s) = v' phi(s)
    :param gamma: discount factor
    :return: sqrt(phi' E_r^a phi + gamma^2 |v|^2 phi' E_F^a phi)
    """
    _check_action(a, tm.n_actions)
    phi_s = np.asarray(phi_s, dtype=float)
    v = np.asarray(v, dtype=float)
    transition = float(phi_s @ tm.evidence[a] @ phi_s) * float(v @ v)
    return float(np.sqrt(reward_variance(rm, phi_s, a) + gamma * gamma * transition))


def reset_residuals(model):
    """Clear the running residual maximum (e^R or e^P) at an episode boundary."""
    return replace(model, max_residual=0.0)
