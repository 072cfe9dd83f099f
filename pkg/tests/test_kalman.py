import numpy as np
import pytest

from sfkalman.diagnostics import DiagnosticEvent, count_events
from sfkalman.errors import ConfigurationError
from sfkalman.kalman import (
    GaussianBelief,
    KfConfig,
    MatrixBelief,
    MmaeBank,
    is_psd,
    kf_likelihood,
    kf_predict,
    kf_update,
    matrix_kf_update,
    mmae_step,
    random_walk_config,
)


def test_predict_identity_leaves_belief_unchanged():
    belief = GaussianBelief([1.0, -2.0], [[2.0, 0.3], [0.3, 1.0]])
    predicted = kf_predict(belief, random_walk_config(2, 0.0, 1.0))
    np.testing.assert_array_equal(predicted.mean, belief.mean)
    np.testing.assert_array_equal(predicted.covariance, belief.covariance)


def test_predict_adds_process_noise():
    belief = GaussianBelief([0.5, 0.5], 0.1 * np.eye(2))
    predicted = kf_predict(belief, random_walk_config(2, 0.01, 1.0))
    np.testing.assert_allclose(predicted.covariance, 0.11 * np.eye(2))
    np.testing.assert_array_equal(predicted.mean, belief.mean)


def test_predict_scales_mean():
    belief = GaussianBelief([2.0, 0.0], np.eye(2))
    predicted = kf_predict(belief, KfConfig(0.5 * np.eye(2), np.zeros((2, 2)), 1.0))
    np.testing.assert_allclose(predicted.mean, [1.0, 0.0])


def test_scalar_update_by_hand():
    belief = GaussianBelief([0.0], [[1.0]])
    posterior, residual, gain = kf_update(belief, [1.0], 1.0, 1.0)
    assert residual == 1.0
    np.testing.assert_allclose(gain, [0.5])
    np.testing.assert_allclose(posterior.mean, [0.5])
    np.testing.assert_allclose(posterior.covariance, [[0.5]])


def test_zero_regressor_carries_no_information():
    belief = GaussianBelief([1.0, 2.0], np.eye(2))
    posterior, _, gain = kf_update(belief, [0.0, 0.0], 5.0, 0.3)
    np.testing.assert_array_equal(gain, [0.0, 0.0])
    np.testing.assert_array_equal(posterior.mean, belief.mean)
    np.testing.assert_array_equal(posterior.covariance, belief.covariance)


def test_repeated_observation_converges_monotonically():
    belief = GaussianBelief([0.0], [[1.0]])
    cfg = random_walk_config(1, 0.0, 0.5)
    means, variances = [], []
    for _ in range(200):
        belief, _, _ = kf_update(kf_predict(belief, cfg), [1.0], 3.0, 0.5)
        means.append(belief.mean[0])
        variances.append(belief.covariance[0, 0])
    assert np.all(np.diff(means) > 0)
    assert np.all(np.diff(variances) < 0)
    assert abs(means[-1] - 3.0) < 0.01
    assert variances[-1] < 0.01


def test_likelihood_values():
    belief = GaussianBelief([0.0], [[0.0]])
    assert kf_likelihood(belief, [1.0], 0.0, 1.0) == pytest.approx(0.39894, abs=1e-5)
    assert kf_likelihood(belief, [1.0], 1.0, 1.0) == pytest.approx(0.24197, abs=1e-5)
    values = [kf_likelihood(belief, [1.0], r, 1.0) for r in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_update_matches_batch_least_squares(rng):
    for _ in range(50):
        L = int(rng.integers(2, 8))
        n = int(rng.integers(L, 40))
        prior_var, noise_var = 2.0, 0.3
        X = rng.normal(size=(n, L))
        y = X @ rng.normal(size=L) + rng.normal(scale=0.5, size=n)

        belief = GaussianBelief(np.zeros(L), prior_var * np.eye(L))
        for h, obs in zip(X, y):
            belief, _, _ = kf_update(belief, h, obs, noise_var)

        precision = X.T @ X / noise_var + np.eye(L) / prior_var
        batch = np.linalg.solve(precision, X.T @ y / noise_var)
        assert np.linalg.norm(belief.mean - batch) <= 1e-6
        np.testing.assert_allclose(belief.covariance, np.linalg.inv(precision), atol=1e-8)


def test_reward_weights_recovered(rng):
    L = 16
    theta_star = rng.uniform(-1.0, 1.0, size=L)
    belief = GaussianBelief(np.zeros(L), np.eye(L))
    cfg = random_walk_config(L, 0.0, 0.01)
    for _ in range(500):
        h = rng.normal(size=L)
        y = h @ theta_star + rng.normal(scale=0.1)
        belief, _, _ = kf_update(kf_predict(belief, cfg), h, y, 0.01)
    assert np.linalg.norm(belief.mean - theta_star) <= 0.05


def test_covariance_stays_symmetric_psd(rng):
    L = 6
    belief = GaussianBelief(np.zeros(L), np.eye(L))
    cfg = random_walk_config(L, 0.01, 0.2)
    for _ in range(300):
        belief, _, _ = kf_update(kf_predict(belief, cfg), rng.normal(size=L), rng.normal(), 0.2)
        assert np.abs(belief.covariance - belief.covariance.T).max() <= 1e-9
        assert is_psd(belief.covariance)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        KfConfig(np.eye(2), np.eye(2), 0.0)
    with pytest.raises(ConfigurationError):
        KfConfig(np.eye(2), -np.eye(2), 1.0)
    with pytest.raises(ConfigurationError):
        GaussianBelief([0.0, 0.0], np.eye(3))


def _bank(noise_vars, mean=None, var=1.0):
    L = 3
    mean = np.zeros(L) if mean is None else mean
    prior = GaussianBelief(mean, var * np.eye(L))
    return MmaeBank.uniform([(prior, random_walk_config(L, 0.0, nv)) for nv in noise_vars])


def test_identical_members_keep_equal_weights(rng):
    bank = _bank([0.5, 0.5])
    for _ in range(50):
        bank, _ = mmae_step(bank, rng.normal(size=3), rng.normal())
    np.testing.assert_allclose(bank.weights, [0.5, 0.5])


def test_single_member_bank_is_plain_filter(rng):
    bank = _bank([0.4])
    belief, cfg = bank.members[0]
    h, y = rng.normal(size=3), 1.3
    bank, fused = mmae_step(bank, h, y)
    expected, _, _ = kf_update(kf_predict(belief, cfg), h, y, 0.4)
    np.testing.assert_allclose(fused.mean, expected.mean)
    np.testing.assert_allclose(fused.covariance, expected.covariance)
    np.testing.assert_array_equal(bank.weights, [1.0])


def test_accurate_member_takes_over():
    theta_star = np.array([1.0, -0.5, 0.25])
    h = np.array([1.0, 0.0, 0.0])
    good = GaussianBelief(theta_star, 1e-6 * np.eye(3))
    bad = GaussianBelief(theta_star + np.array([1.0, 0.0, 0.0]), 1e-6 * np.eye(3))
    cfg = random_walk_config(3, 0.0, 0.01)
    bank = MmaeBank.uniform([(good, cfg), (bad, cfg)])
    for _ in range(3):
        bank, fused = mmae_step(bank, h, h @ theta_star)
    assert bank.weights[0] > 0.999
    assert abs(bank.weights.sum() - 1.0) <= 1e-12


def test_fused_mean_is_permutation_invariant(rng):
    members = [
        (GaussianBelief(rng.normal(size=3), np.eye(3)), random_walk_config(3, 0.01, nv))
        for nv in (0.1, 1.0, 5.0)
    ]
    forward, backward = MmaeBank.uniform(members), MmaeBank.uniform(members[::-1])
    for _ in range(20):
        h, y = rng.normal(size=3), rng.normal()
        forward, f1 = mmae_step(forward, h, y)
        backward, f2 = mmae_step(backward, h, y)
    np.testing.assert_allclose(f1.mean, f2.mean, atol=1e-12)


def test_likelihood_underflow_keeps_weights():
    bank = _bank([0.01, 0.02], var=1e-6)
    weights = bank.weights.copy()
    with count_events() as counter:
        bank, _ = mmae_step(bank, np.ones(3), 1e6)
    np.testing.assert_array_equal(bank.weights, weights)
    assert counter.counts[DiagnosticEvent.LIKELIHOOD_UNDERFLOW.value] == 1


def test_bank_rejects_weights_off_simplex():
    prior = GaussianBelief(np.zeros(2), np.eye(2))
    cfg = random_walk_config(2, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        MmaeBank(((prior, cfg), (prior, cfg)), np.array([0.7, 0.7]))


def test_matrix_zero_regressor_only_predicts():
    L = 3
    mean = np.arange(9.0).reshape(3, 3)
    mb = MatrixBelief(mean, 2.0 * np.eye(L), 0.6, 1.0, decay=0.9)
    updated = matrix_kf_update(mb, np.zeros(L), np.ones(L))
    np.testing.assert_allclose(updated.mean, 0.9 * mean)
    np.testing.assert_allclose(
        updated.full_covariance(), 0.81 * mb.full_covariance() + 0.6 * np.eye(L * L)
    )


def test_matrix_filter_with_one_feature_matches_scalar_filter(rng):
    mb = MatrixBelief([[0.3]], [[2.0]], 0.05, 0.4, decay=1.0)
    belief, cfg = GaussianBelief([0.3], [[2.0]]), random_walk_config(1, 0.05, 0.4)
    for _ in range(30):
        x, y = rng.normal(), rng.normal()
        mb = matrix_kf_update(mb, [x], [y])
        belief, _, _ = kf_update(kf_predict(belief, cfg), [x], y, 0.4)
        assert abs(mb.mean[0, 0] - belief.mean[0]) <= 1e-12
        assert abs(mb.covariance[0, 0] - belief.covariance[0, 0]) <= 1e-12


def test_factored_and_dense_paths_agree(rng):
    L = 4
    factored = MatrixBelief(0.5 * np.eye(L), 3.0 * np.eye(L), 0.5, 1.0)
    dense = factored.to_dense()
    assert factored.factored and not dense.factored
    for _ in range(25):
        x, y = rng.uniform(size=L), rng.uniform(size=L)
        factored = matrix_kf_update(factored, x, y)
        dense = matrix_kf_update(dense, x, y)
    np.testing.assert_allclose(factored.mean, dense.mean, atol=1e-10)
    np.testing.assert_allclose(factored.full_covariance(), dense.covariance, atol=1e-10)
    assert factored.covariance_trace() == pytest.approx(dense.covariance_trace())
    x, w = rng.uniform(size=L), rng.normal(size=L)
    assert factored.projected_variance(x, w) == pytest.approx(dense.projected_variance(x, w))


def test_column_stacked_regressor():
    L = 2
    mb = MatrixBelief(np.zeros((L, L)), np.eye(L * L), 0.0, 1.0, decay=1.0)
    updated = matrix_kf_update(mb, np.array([1.0, 0.0]), np.array([2.0, 0.0]))
    # vec(F) stacks columns, so x = e_0 only informs column 0
    assert updated.mean[0, 0] == pytest.approx(1.0)
    np.testing.assert_array_equal(updated.mean[:, 1], [0.0, 0.0])


def test_transition_matrix_recovered(rng):
    L = 4
    F_star = rng.normal(size=(L, L))
    F_star *= 0.9 / np.linalg.norm(F_star, 2)
    mb = MatrixBelief(np.zeros((L, L)), 10.0 * np.eye(L), 0.0, 0.01, decay=1.0)
    for _ in range(2000):
        x = rng.normal(size=L)
        mb = matrix_kf_update(mb, x, F_star @ x + rng.normal(scale=0.1, size=L))
    assert np.linalg.norm(mb.mean - F_star) <= 0.1
    assert is_psd(mb.covariance)


def test_projected_variance_matches_sampling(rng):
    L = 3
    cov = np.diag([1.0, 2.0, 0.5, 0.1, 1.5, 0.7, 0.3, 0.9, 1.2])
    mb = MatrixBelief(np.zeros((L, L)), cov, 0.0, 1.0, decay=1.0)
    x, w = np.array([1.0, -0.5, 2.0]), np.array([0.3, 1.0, -1.0])
    draws = rng.multivariate_normal(np.zeros(L * L), cov, size=20_000).reshape((-1, L, L))
    # row j of each draw is column j of F
    values = np.einsum("i,nji,j->n", w, draws, x)
    expected = np.kron(x, w) @ cov @ np.kron(x, w)
    assert mb.projected_variance(x, w) == pytest.approx(expected)
    assert np.var(values) == pytest.approx(expected, rel=0.05)
