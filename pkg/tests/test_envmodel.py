import numpy as np
import pytest

from sfkalman.envmodel import (
    PiAggregation,
    exploration_bonus,
    new_reward_model,
    new_transition_model,
    observe_reward,
    observe_transition,
    predicted_next_features,
    predicted_reward,
    reset_residuals,
    reward_variance,
    state_bonus,
)
from sfkalman.errors import ValidationError


def _reward_model(n_actions=4, L=16, process_noise=0.01, **kwargs):
    return new_reward_model(
        n_actions, L, prior_var=0.1, process_noise=process_noise, noise_vars=(0.2,), **kwargs
    )


def _transition_model(n_actions=4, L=16, prior_scale=0.02, **kwargs):
    return new_transition_model(
        n_actions,
        L,
        prior_scale=prior_scale,
        prior_var=5.0,
        process_noise=0.6,
        measurement_noise=1.0,
        **kwargs,
    )


def test_initial_bonus():
    assert exploration_bonus(_reward_model(), _transition_model(), 2) == pytest.approx(1281.6)


def test_reward_update_sets_policy_weights(rng):
    rm = _reward_model()
    updated = observe_reward(rm, rng.uniform(size=16), 1, 1.0)
    np.testing.assert_array_equal(updated.theta_pi, updated.theta(1))
    for b in (0, 2, 3):
        assert updated.banks[b] is rm.banks[b]
        assert updated.fused[b] is rm.fused[b]


def test_uniform_aggregation_averages(rng):
    rm = _reward_model(aggregation=PiAggregation.UNIFORM)
    updated = observe_reward(rm, rng.uniform(size=16), 0, 1.0)
    expected = np.mean([updated.theta(a) for a in range(4)], axis=0)
    np.testing.assert_allclose(updated.theta_pi, expected)


def test_transition_update_sets_policy_matrix(rng):
    tm = _transition_model()
    updated = observe_transition(tm, rng.uniform(size=16), 3, rng.uniform(size=16))
    np.testing.assert_array_equal(updated.f_pi, updated.beliefs[3].mean)
    for b in range(3):
        assert updated.beliefs[b] is tm.beliefs[b]


def test_residual_maxima_and_reset():
    rm = _reward_model(L=2)
    rm = observe_reward(rm, [1.0, 0.0], 0, 2.0)
    assert rm.max_residual == pytest.approx(2.0)
    rm = observe_reward(rm, [1.0, 0.0], 0, rm.theta(0)[0])
    assert rm.max_residual == pytest.approx(2.0)
    assert reset_residuals(rm).max_residual == 0.0

    tm = _transition_model(L=2, prior_scale=1.0)
    tm = observe_transition(tm, [1.0, 0.0], 0, [1.0, 3.0])
    assert tm.max_residual == pytest.approx(3.0)


def test_predictions():
    rm = _reward_model(L=3)
    assert predicted_reward(rm, [0.3, 0.2, 0.1], 0) == 0.0
    rm = observe_reward(rm, [0.0, 1.0, 0.0], 0, 1.0)
    assert predicted_reward(rm, [0.0, 1.0, 0.0], 0) == pytest.approx(rm.theta(0)[1])

    phi = np.array([0.3, 0.2, 0.1])
    np.testing.assert_allclose(predicted_next_features(_transition_model(L=3, prior_scale=1.0), phi, 1), phi)
    np.testing.assert_array_equal(predicted_next_features(_transition_model(L=3, prior_scale=0.0), phi, 1), 0.0)


def test_tried_action_has_smaller_bonus(rng):
    rm, tm = _reward_model(), _transition_model()
    for _ in range(50):
        phi, phi_next = rng.uniform(size=16), rng.uniform(size=16)
        rm = observe_reward(rm, phi, 0, float(rng.normal()))
        tm = observe_transition(tm, phi, 0, phi_next)
    assert exploration_bonus(rm, tm, 1) > exploration_bonus(rm, tm, 0)


def test_reward_uncertainty_nonincreasing_without_process_noise(rng):
    rm = _reward_model(process_noise=0.0)
    traces = [np.trace(rm.fused[0].covariance)]
    for _ in range(30):
        rm = observe_reward(rm, rng.uniform(size=16), 0, float(rng.normal()))
        traces.append(np.trace(rm.fused[0].covariance))
    assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:]))


def test_action_labels_are_interchangeable(rng):
    phi, r = rng.uniform(size=16), 0.7
    first = observe_reward(_reward_model(), phi, 0, r)
    second = observe_reward(_reward_model(), phi, 2, r)
    np.testing.assert_array_equal(first.theta(0), second.theta(2))


def test_invalid_action():
    with pytest.raises(ValidationError):
        observe_reward(_reward_model(), np.ones(16), 4, 1.0)
    with pytest.raises(ValidationError):
        exploration_bonus(_reward_model(), _transition_model(), -1)
    with pytest.raises(ValidationError):
        state_bonus(_reward_model(), _transition_model(), np.ones(16), 4, np.zeros(16), 0.9)


def test_evidence_starts_at_the_prior():
    rm, tm = _reward_model(), _transition_model()
    for a in range(4):
        np.testing.assert_array_equal(rm.evidence[a], 0.1 * np.eye(16))
        np.testing.assert_array_equal(tm.evidence[a], 5.0 * np.eye(16))


def test_state_bonus_without_value_is_reward_deviation(rng):
    phi = rng.uniform(size=16)
    bonus = state_bonus(_reward_model(), _transition_model(), phi, 3, np.zeros(16), 0.95)
    assert bonus == pytest.approx(np.sqrt(0.1 * phi @ phi))


def test_state_bonus_adds_transition_spread(rng):
    phi, v = rng.uniform(size=16), rng.normal(size=16)
    bonus = state_bonus(_reward_model(), _transition_model(), phi, 0, v, 0.9)
    expected = np.sqrt(0.1 * phi @ phi + 0.81 * 5.0 * (phi @ phi) * (v @ v))
    assert bonus == pytest.approx(expected)


def test_state_bonus_falls_only_for_the_tried_action(rng):
    rm, tm = _reward_model(), _transition_model()
    phi, v = rng.uniform(size=16), rng.normal(size=16)
    before = [state_bonus(rm, tm, phi, a, v, 0.95) for a in range(4)]
    rm = observe_reward(rm, phi, 2, 0.0)
    tm = observe_transition(tm, phi, 2, rng.uniform(size=16))
    after = [state_bonus(rm, tm, phi, a, v, 0.95) for a in range(4)]
    assert after[2] < before[2]
    assert [after[a] for a in (0, 1, 3)] == [before[a] for a in (0, 1, 3)]


def test_use_elsewhere_never_raises_state_bonus(rng):
    rm, tm = _reward_model(), _transition_model()
    here, v = rng.uniform(size=16), rng.normal(size=16)
    bonuses = [state_bonus(rm, tm, here, 0, v, 0.95)]
    for _ in range(200):
        phi = rng.uniform(size=16)
        rm = observe_reward(rm, phi, 0, float(rng.normal()))
        tm = observe_transition(tm, phi, 0, rng.uniform(size=16))
        bonuses.append(state_bonus(rm, tm, here, 0, v, 0.95))
    assert all(b <= a + 1e-12 for a, b in zip(bonuses, bonuses[1:]))


def test_bonus_follows_local_tries_not_total_use():
    rm, tm = _reward_model(), _transition_model()
    here, elsewhere = np.eye(16)[0], np.eye(16)[5]
    rm = observe_reward(rm, here, 0, 0.0)
    tm = observe_transition(tm, here, 0, elsewhere)
    for _ in range(100):
        rm = observe_reward(rm, elsewhere, 1, 0.0)
        tm = observe_transition(tm, elsewhere, 1, here)
    v = np.ones(16)
    assert state_bonus(rm, tm, here, 0, v, 0.95) < state_bonus(rm, tm, here, 1, v, 0.95)
    assert state_bonus(rm, tm, here, 1, v, 0.95) == pytest.approx(
        state_bonus(_reward_model(), _transition_model(), here, 1, v, 0.95)
    )
    assert reward_variance(rm, elsewhere, 1) < reward_variance(rm, elsewhere, 0)
