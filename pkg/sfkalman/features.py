"""
Radial basis function featurization of raw states and its online refinement.

Each basis j is a Gaussian bump exp(-0.5 (s - mu_j)^T Sigma_j^{-1} (s - mu_j))
with a diagonal Sigma_j. The map stores all centers and diagonal variances as
L x D arrays; :attr:`FeatureMap.bases` gives the per-basis view.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from sfkalman.diagnostics import DiagnosticEvent, report
from sfkalman.errors import ConfigurationError

VARIANCE_FLOOR = 1e-6


class Sample(NamedTuple):
    s: np.ndarray
    a: int
    s_next: np.ndarray
    r: float


@dataclass(frozen=True, eq=False)
class RbfBasis:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True, eq=False)
class FeatureMap:
    centers: np.ndarray
    variances: np.ndarray
    lr_mu: float = 0.001
    lr_sigma: float = 0.001
    dims: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        variances = np.asarray(self.variances, dtype=float)
        if variances.shape != centers.shape:
            raise ConfigurationError(
                f"variances {variances.shape} do not match centers {centers.shape}"
            )
        if np.any(variances <= 0):
            raise ConfigurationError("RBF variances must be positive")
        if not (self.lr_mu > 0 and self.lr_sigma > 0):
            raise ConfigurationError(
                f"learning rates must be positive, got {self.lr_mu}, {self.lr_sigma}"
            )
        dims = None if self.dims is None else tuple(int(d) for d in self.dims)
        if dims is not None and len(dims) != centers.shape[1]:
            raise ConfigurationError(
                f"{len(dims)} featurized dimensions but centers have {centers.shape[1]}"
            )
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "dims", dims)

    @property
    def n_features(self) -> int:
        return self.centers.shape[0]

    @property
    def state_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def bases(self) -> List[RbfBasis]:
        return [RbfBasis(mu, np.diag(var)) for mu, var in zip(self.centers, self.variances)]

    def select(self, s) -> np.ndarray:
        """Pick the featurized coordinates out of a raw state."""
        s = np.asarray(s, dtype=float).ravel()
        if self.dims is not None:
            s = s[list(self.dims)]
        if s.shape != (self.state_dim,):
            raise ConfigurationError(
                f"state has {s.size} featurized coordinates, expected {self.state_dim}"
            )
        return s


def _bumps(fm: FeatureMap, x: np.ndarray):
    diff = x - fm.centers
    return np.exp(-0.5 * np.sum(diff * diff / fm.variances, axis=1)), diff


def featurize(fm: FeatureMap, s) -> np.ndarray:
    return _bumps(fm, fm.select(s))[0]


def feature_gradients(
    fm: FeatureMap, sample: Sample, theta_a, F_a=None
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Loss J and its gradients with respect to the centers and the diagonal
    variances. phi(s') is differentiated too, since it shares the bases.

    :param fm: current feature map
    :param sample: transition (s, a, s', r)
    :param theta_a: reward weights of the acted action
    :param F_a: transition matrix of the acted action; None drops the transition term
    :return: (J, dJ/dcenters, dJ/dvariances)
    """
    u, du = _bumps(fm, fm.select(sample.s))
    w, dw = _bumps(fm, fm.select(sample.s_next))
    theta = np.asarray(theta_a, dtype=float)

    reward_err = sample.r - theta @ u
    norm_err = u @ u - 1.0
    loss = reward_err**2 + norm_err**2
    grad_u = -2.0 * reward_err * theta + 4.0 * norm_err * u
    grad_w = np.zeros_like(w)
    if F_a is not None:
        F = np.asarray(F_a, dtype=float)
        transition_err = w - F @ u
        loss += transition_err @ transition_err
        grad_u -= 2.0 * F.T @ transition_err
        grad_w = 2.0 * transition_err

    var = fm.variances
    coef_u = (grad_u * u)[:, None]
    coef_w = (grad_w * w)[:, None]
    grad_centers = (coef_u * du + coef_w * dw) / var
    grad_variances = 0.5 * (coef_u * du**2 + coef_w * dw**2) / var**2
    return float(loss), grad_centers, grad_variances


def feature_loss(fm: FeatureMap, sample: Sample, theta_a, F_a=None) -> float:
    """J = (r - theta.phi(s))^2 + |phi(s') - F phi(s)|^2 + (|phi(s)|^2 - 1)^2"""
    u = featurize(fm, sample.s)
    loss = (sample.r - np.asarray(theta_a) @ u) ** 2 + (u @ u - 1.0) ** 2
    if F_a is not None:
        err = featurize(fm, sample.s_next) - np.asarray(F_a) @ u
        loss += err @ err
    return float(loss)


def feature_sgd_step(fm: FeatureMap, sample: Sample, theta_a, F_a=None) -> FeatureMap:
    _, grad_centers, grad_variances = feature_gradients(fm, sample, theta_a, F_a)
    if not (np.all(np.isfinite(grad_centers)) and np.all(np.isfinite(grad_variances))):
        report(DiagnosticEvent.NONFINITE_GRADIENT, "non-finite feature gradient; step skipped")
        return fm
    return replace(
        fm,
        centers=fm.centers - fm.lr_mu * grad_centers,
        variances=np.maximum(fm.variances - fm.lr_sigma * grad_variances, VARIANCE_FLOOR),
    )


def default_rbf_grid(
    D: int,
    order: int,
    lo,
    hi,
    *,
    inclusive: bool = False,
    variance: Optional[float] = None,
    lr_mu: float = 0.001,
    lr_sigma: float = 0.001,
    dims: Optional[Sequence[int]] = None,
) -> FeatureMap:
    """
    Even grid of order^D centers with variance 2 / (order - 1) on every axis.

    With ``inclusive`` the grid spans [lo, hi] including both ends; otherwise
    the order points split [lo, hi] into order + 1 equal gaps (interior grid).
    """
    if order < 2:
        raise ConfigurationError(f"RBF order must be at least 2, got {order}")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (D,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (D,))
    if inclusive:
        axes = [np.linspace(a, b, order) for a, b in zip(lo, hi)]
    else:
        axes = [np.linspace(a, b, order + 2)[1:-1] for a, b in zip(lo, hi)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, D)
    var = 2.0 / (order - 1) if variance is None else variance
    return FeatureMap(
        centers,
        np.full_like(centers, var),
        lr_mu=lr_mu,
        lr_sigma=lr_sigma,
        dims=dims,
    )
