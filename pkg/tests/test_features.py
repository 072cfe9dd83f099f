import numpy as np
import pytest

from sfkalman.diagnostics import DiagnosticEvent, count_events
from sfkalman.errors import ConfigurationError
from sfkalman.features import (
    VARIANCE_FLOOR,
    FeatureMap,
    Sample,
    default_rbf_grid,
    feature_gradients,
    feature_loss,
    feature_sgd_step,
    featurize,
)


def test_component_is_one_at_its_center():
    fm = default_rbf_grid(2, 3, 0.0, 1.0)
    assert featurize(fm, fm.centers[4])[4] == 1.0


def test_one_dimensional_value():
    fm = FeatureMap([[0.0]], [[1.0]])
    assert featurize(fm, [1.0])[0] == pytest.approx(np.exp(-0.5))


def test_components_decrease_along_a_ray():
    fm = FeatureMap([[0.2, 0.3]], [[0.5, 0.8]])
    direction = np.array([0.6, -0.8])
    values = [featurize(fm, fm.centers[0] + t * direction)[0] for t in np.linspace(0, 2, 20)]
    assert np.all(np.diff(values) < 0)


def test_features_bounded(rng):
    fm = default_rbf_grid(2, 4, 0.0, 1.0)
    for s in rng.uniform(-1.0, 2.0, size=(100, 2)):
        phi = featurize(fm, s)
        assert np.all(phi > 0) and np.all(phi <= 1)


def test_selected_dimensions():
    fm = default_rbf_grid(2, 5, 0.0, 4.8, inclusive=True, dims=(0, 2))
    np.testing.assert_array_equal(featurize(fm, [1, 5, 2]), featurize(fm, [1, 0, 2]))
    with pytest.raises(ConfigurationError):
        featurize(default_rbf_grid(2, 3, 0.0, 1.0), [0.1, 0.2, 0.3])


def _unit_sample():
    return Sample(np.array([0.5]), 0, np.array([0.5]), 1.0)


def test_loss_zero_for_perfect_model():
    fm = FeatureMap([[0.5]], [[1.0]])
    assert feature_loss(fm, _unit_sample(), [1.0], [[1.0]]) == 0.0


def test_loss_single_unit_residual():
    fm = FeatureMap([[0.5]], [[1.0]])
    sample = Sample(np.array([0.5]), 0, np.array([1000.0]), 1.0)
    assert feature_loss(fm, sample, [0.0], [[0.0]]) == 1.0


def test_reward_term_is_quadratic():
    fm = FeatureMap([[0.5]], [[1.0]])
    base = feature_loss(fm, Sample(np.array([0.5]), 0, np.array([0.5]), 1.0), [0.0])
    doubled = feature_loss(fm, Sample(np.array([0.5]), 0, np.array([0.5]), 2.0), [0.0])
    # unit-norm features leave only the reward term
    assert doubled == pytest.approx(4 * base)


def test_zero_loss_leaves_parameters_unchanged():
    fm = FeatureMap([[0.5]], [[1.0]], lr_mu=0.1, lr_sigma=0.1)
    stepped = feature_sgd_step(fm, _unit_sample(), [1.0], [[1.0]])
    np.testing.assert_array_equal(stepped.centers, fm.centers)
    np.testing.assert_array_equal(stepped.variances, fm.variances)


def _numeric_gradient(fm, sample, theta, F, eps=1e-5):
    grads = []
    for name in ("centers", "variances"):
        base = getattr(fm, name)
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += eps
            minus[idx] -= eps
            loss_plus = feature_loss(FeatureMap(**{**_fields(fm), name: plus}), sample, theta, F)
            loss_minus = feature_loss(FeatureMap(**{**_fields(fm), name: minus}), sample, theta, F)
            grad[idx] = (loss_plus - loss_minus) / (2 * eps)
        grads.append(grad)
    return grads


def _fields(fm):
    return {"centers": fm.centers, "variances": fm.variances, "lr_mu": fm.lr_mu, "lr_sigma": fm.lr_sigma}


def test_gradient_matches_finite_differences(rng):
    for _ in range(100):
        L, D = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        fm = FeatureMap(rng.uniform(0, 1, size=(L, D)), rng.uniform(0.3, 1.5, size=(L, D)))
        s = rng.uniform(0, 1, size=D)
        sample = Sample(s, 0, s + rng.normal(scale=0.1, size=D), float(rng.normal()))
        theta = rng.normal(size=L)
        F = rng.normal(scale=0.3, size=(L, L)) if rng.random() < 0.8 else None

        _, grad_centers, grad_variances = feature_gradients(fm, sample, theta, F)
        num_centers, num_variances = _numeric_gradient(fm, sample, theta, F)
        analytic = np.concatenate([grad_centers.ravel(), grad_variances.ravel()])
        numeric = np.concatenate([num_centers.ravel(), num_variances.ravel()])
        scale = max(np.linalg.norm(analytic), 1e-8)
        assert np.linalg.norm(analytic - numeric) / scale <= 1e-4


def test_small_step_decreases_loss():
    fm = FeatureMap([[0.2, 0.4], [0.7, 0.6], [0.5, 0.1]], np.full((3, 2), 0.5), 1e-6, 1e-6)
    sample = Sample(np.array([0.3, 0.5]), 0, np.array([0.35, 0.5]), 1.0)
    theta, F = np.array([0.2, -0.1, 0.4]), 0.3 * np.eye(3)
    before = feature_loss(fm, sample, theta, F)
    after = feature_loss(feature_sgd_step(fm, sample, theta, F), sample, theta, F)
    assert after < before


def test_variances_clamped_at_floor():
    fm = FeatureMap([[0.0]], [[2e-6]], lr_mu=1e-3, lr_sigma=1e3)
    sample = Sample(np.array([1e-3]), 0, np.array([1e-3]), 0.0)
    stepped = feature_sgd_step(fm, sample, [1.0])
    assert np.all(stepped.variances >= VARIANCE_FLOOR)
    assert np.all(np.isfinite(stepped.centers))


def test_nonfinite_gradient_skips_step():
    fm = default_rbf_grid(2, 3, 0.0, 1.0)
    sample = Sample(np.array([0.5, 0.5]), 0, np.array([0.5, 0.55]), 1.0)
    with count_events() as counter:
        stepped = feature_sgd_step(fm, sample, np.full(9, np.nan))
    assert stepped is fm
    assert counter.counts[DiagnosticEvent.NONFINITE_GRADIENT.value] == 1


def test_default_grid_interior():
    fm = default_rbf_grid(2, 4, 0.0, 1.0)
    assert fm.n_features == 16
    np.testing.assert_allclose(np.unique(fm.centers[:, 0]), [0.2, 0.4, 0.6, 0.8])
    np.testing.assert_allclose(fm.variances, 2.0 / 3.0)


def test_default_grid_inclusive():
    fm = default_rbf_grid(2, 5, 0.0, 4.8, inclusive=True)
    assert fm.n_features == 25
    np.testing.assert_allclose(np.unique(fm.centers[:, 1]), [0.0, 1.2, 2.4, 3.6, 4.8])
    np.testing.assert_allclose(fm.variances, 0.5)


def test_default_grid_small_order():
    fm = default_rbf_grid(1, 2, 0.0, 1.0)
    assert fm.n_features == 2
    np.testing.assert_allclose(fm.variances, 2.0)
    with pytest.raises(ConfigurationError):
        default_rbf_grid(1, 1, 0.0, 1.0)


def test_feature_map_validation():
    with pytest.raises(ConfigurationError):
        FeatureMap([[0.0, 0.0]], [[1.0]])
    with pytest.raises(ConfigurationError):
        FeatureMap([[0.0]], [[-1.0]])
    with pytest.raises(ConfigurationError):
        FeatureMap([[0.0]], [[1.0]], lr_mu=0.0)
