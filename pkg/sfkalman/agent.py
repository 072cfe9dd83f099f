"""
Uncertainty-aware model-based successor-feature agent and its two ablations:
the same learner with epsilon-greedy selection, and a TD variant that
estimates the successor matrix directly instead of a transition model.

One training step (``agent_step``) runs, in order: featurize s and s',
update the reward filter of the acted action, update its transition filter,
take one SGD step on the features, then refresh the Q weights used by the
next selection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Protocol, Tuple

import numpy as np

from sfkalman.envmodel import (
    RewardModel,
    TransitionModel,
    observe_reward,
    observe_transition,
    reset_residuals,
    reward_variance,
    state_bonus,
)
from sfkalman.errors import ConfigurationError
from sfkalman.features import FeatureMap, Sample, feature_sgd_step, featurize
from sfkalman.kalman import MatrixBelief, matrix_kf_update
from sfkalman.successor import SfSolution, error_bound, solve_sf


class PolicyKind(str, Enum):
    UNCERTAINTY_AWARE = "uncertainty_aware"
    EPSILON_GREEDY = "epsilon_greedy"
    UA_TD_SF = "ua_td_sf"


class Environment(Protocol):
    n_actions: int

    def reset(self, rng: np.random.Generator): ...

    def step(self, s, a: int, rng: np.random.Generator): ...


@dataclass(frozen=True, eq=False)
class AgentState:
    feature_map: FeatureMap
    reward_model: RewardModel
    transition_model: TransitionModel
    gamma: float
    policy_kind: PolicyKind = PolicyKind.UNCERTAINTY_AWARE
    epsilon: float = 0.0
    successor_model: Optional[MatrixBelief] = None
    solution: Optional[SfSolution] = None

    def __post_init__(self):
        object.__setattr__(self, "policy_kind", PolicyKind(self.policy_kind))
        if not 0 <= self.gamma < 1:
            raise ConfigurationError(f"discount must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        L = self.feature_map.n_features
        if self.reward_model.n_features != L or self.transition_model.n_features != L:
            raise ConfigurationError(
                f"feature map has L={L}, reward model {self.reward_model.n_features}, "
                f"transition model {self.transition_model.n_features}"
            )
        if self.reward_model.n_actions != self.transition_model.n_actions:
            raise ConfigurationError("reward and transition models disagree on the action count")
        if self.policy_kind is PolicyKind.UA_TD_SF:
            if self.successor_model is None or self.successor_model.n_features != L:
                raise ConfigurationError("the TD variant needs an L x L successor matrix belief")

    @property
    def n_actions(self) -> int:
        return self.reward_model.n_actions

    @property
    def n_features(self) -> int:
        return self.feature_map.n_features


@dataclass
class EpisodeRecord:
    length: int
    total_return: float
    reached_goal: bool
    bound_trace: Optional[List[float]] = None


def successor_prior(n_features: int, prior_var: float, process_noise: float, measurement_noise: float) -> MatrixBelief:
    """Psi prior at the identity, with no evolution decay."""
    return MatrixBelief(
        np.eye(n_features),
        prior_var * np.eye(n_features),
        process_noise,
        measurement_noise,
        decay=1.0,
    )


def refresh(agent: AgentState) -> AgentState:
    """Recompute the cached value and Q weights from the current models."""
    if agent.policy_kind is PolicyKind.UA_TD_SF:
        return replace(agent, solution=None)
    rm, tm = agent.reward_model, agent.transition_model
    solution = solve_sf(
        [rm.theta(a) for a in range(agent.n_actions)],
        rm.theta_pi,
        [belief.mean for belief in tm.beliefs],
        tm.f_pi,
        agent.gamma,
    )
    return replace(agent, solution=solution)


def new_agent(
    feature_map: FeatureMap,
    reward_model: RewardModel,
    transition_model: TransitionModel,
    gamma: float,
    policy_kind: PolicyKind = PolicyKind.UNCERTAINTY_AWARE,
    epsilon: float = 0.0,
    successor_model: Optional[MatrixBelief] = None,
) -> AgentState:
    agent = AgentState(
        feature_map,
        reward_model,
        transition_model,
        gamma,
        policy_kind,
        epsilon,
        successor_model,
    )
    return refresh(agent)


def action_values(agent: AgentState, phi) -> np.ndarray:
    """
    Q(s, .) from the cached weights (the previous step's estimates). The TD
    variant scores every action with the same theta^pi' Psi phi(s).
    """
    phi = np.asarray(phi, dtype=float)
    if agent.policy_kind is PolicyKind.UA_TD_SF:
        value = agent.reward_model.theta_pi @ agent.successor_model.mean @ phi
        return np.full(agent.n_actions, float(value))
    if agent.solution is None:
        agent = refresh(agent)
    return agent.solution.q_values(phi)


def exploration_bonuses(agent: AgentState, phi) -> np.ndarray:
    """Per-action standard deviation of Q(s, .) at the features ``phi``."""
    phi = np.asarray(phi, dtype=float)
    rm, tm = agent.reward_model, agent.transition_model
    if agent.policy_kind is PolicyKind.UA_TD_SF:
        psi_var = agent.successor_model.projected_variance(phi, rm.theta_pi)
        return np.sqrt(
            [reward_variance(rm, phi, a) + psi_var for a in range(agent.n_actions)]
        )
    v = value_vector(agent)
    return np.array(
        [state_bonus(rm, tm, phi, a, v, agent.gamma) for a in range(agent.n_actions)]
    )


def select_action(agent: AgentState, s) -> int:
    """argmax_b Q(s, b) + sigma_Q(s, b); ties go to the lowest index."""
    phi = featurize(agent.feature_map, s)
    return int(np.argmax(action_values(agent, phi) + exploration_bonuses(agent, phi)))


def select_action_epsilon(agent: AgentState, s, eps: float, rng: np.random.Generator) -> int:
    if not 0 <= eps <= 1:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {eps}")
    if rng.random() < eps:
        return int(rng.integers(agent.n_actions))
    return int(np.argmax(action_values(agent, featurize(agent.feature_map, s))))


def choose_action(agent: AgentState, s, rng: np.random.Generator) -> int:
    if agent.policy_kind is PolicyKind.EPSILON_GREEDY:
        return select_action_epsilon(agent, s, agent.epsilon, rng)
    return select_action(agent, s)


def agent_step(agent: AgentState, sample: Sample) -> AgentState:
    if agent.policy_kind is PolicyKind.UA_TD_SF:
        return ua_td_sf_step(agent, sample)
    fm = agent.feature_map
    phi_s = featurize(fm, sample.s)
    phi_next = featurize(fm, sample.s_next)
    rm = observe_reward(agent.reward_model, phi_s, sample.a, sample.r)
    tm = observe_transition(agent.transition_model, phi_s, sample.a, phi_next)
    fm = feature_sgd_step(fm, sample, rm.theta(sample.a), tm.beliefs[sample.a].mean)
    return refresh(replace(agent, feature_map=fm, reward_model=rm, transition_model=tm))


def observe_successor(psi: MatrixBelief, phi_s, phi_next, gamma: float) -> MatrixBelief:
    """One filter step on phi(s) = Psi (phi(s) - gamma phi(s')) + noise."""
    phi_s = np.asarray(phi_s, dtype=float)
    return matrix_kf_update(psi, phi_s - gamma * np.asarray(phi_next, dtype=float), phi_s)


def ua_td_sf_step(agent: AgentState, sample: Sample) -> AgentState:
    if agent.policy_kind is not PolicyKind.UA_TD_SF:
        raise ConfigurationError("ua_td_sf_step needs an agent of kind ua_td_sf")
    fm = agent.feature_map
    phi_s = featurize(fm, sample.s)
    phi_next = featurize(fm, sample.s_next)
    rm = observe_reward(agent.reward_model, phi_s, sample.a, sample.r)
    psi = observe_successor(agent.successor_model, phi_s, phi_next, agent.gamma)
    fm = feature_sgd_step(fm, sample, rm.theta(sample.a))
    return replace(agent, feature_map=fm, reward_model=rm, successor_model=psi)


def value_vector(agent: AgentState) -> np.ndarray:
    if agent.policy_kind is PolicyKind.UA_TD_SF:
        return agent.successor_model.mean.T @ agent.reward_model.theta_pi
    if agent.solution is None:
        agent = refresh(agent)
    return agent.solution.v_weights


def error_bound_trace(agent: AgentState) -> float:
    return error_bound(
        agent.reward_model.max_residual,
        agent.transition_model.max_residual,
        value_vector(agent),
        agent.gamma,
    )


def begin_episode(agent: AgentState) -> AgentState:
    return replace(
        agent,
        reward_model=reset_residuals(agent.reward_model),
        transition_model=reset_residuals(agent.transition_model),
    )


def run_episode(
    agent: AgentState,
    env: Environment,
    max_steps: int,
    rng: np.random.Generator,
    record_bound: bool = False,
) -> Tuple[AgentState, EpisodeRecord]:
    agent = begin_episode(agent)
    s = env.reset(rng)
    length, total, reached = 0, 0.0, False
    trace = [] if record_bound else None
    while length < max_steps:
        a = choose_action(agent, s, rng)
        s_next, r, done = env.step(s, a, rng)
        agent = agent_step(agent, Sample(s, a, s_next, r))
        length += 1
        total += r
        if trace is not None:
            trace.append(error_bound_trace(agent))
        s = s_next
        if done:
            reached = True
            break
    return agent, EpisodeRecord(length, total, reached, trace)
