"""
Recursive Bayesian estimators used by the model learner.

Three filters live here: the linear Kalman filter over a parameter vector
(reward weights), a likelihood-weighted bank of such filters, and the
matrix-variate filter over a transition matrix F. The matrix filter is a
standard KF on the column-stacked vec(F) with regressor (x^T kron I_L).

When the covariance of vec(F) has the form P kron I_L and both noise terms
are isotropic, the vectorized recursion never leaves that form, so the filter
only has to carry the L x L factor P. The default configurations all take
that route; dense covariances remain for full-matrix noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy.stats import norm

from sfkalman.diagnostics import DiagnosticEvent, report
from sfkalman.errors import (
    ConfigurationError,
    NumericalDegeneracyError,
    ValidationError,
)

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-9
LIKELIHOOD_FLOOR = 1e-300
DEFAULT_DECAY = 0.9


def symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def is_psd(cov, tol: float = PSD_TOL) -> bool:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        return bool(cov >= -tol)
    if np.abs(cov - cov.T).max(initial=0.0) > SYMMETRY_TOL:
        return False
    return bool(np.linalg.eigvalsh(symmetrize(cov)).min() >= -tol)


def _square(name: str, value, size: int) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if value.shape != (size, size):
        raise ConfigurationError(
            f"{name} has shape {value.shape}, expected {(size, size)}"
        )
    return value


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 1:
            raise ConfigurationError(f"belief mean must be a vector, got {mean.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(
            self, "covariance", _square("belief covariance", self.covariance, mean.size)
        )

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class KfConfig:
    evolution_matrix: np.ndarray
    process_noise_cov: np.ndarray
    measurement_noise_var: float

    def __post_init__(self):
        evolution = np.asarray(self.evolution_matrix, dtype=float)
        if evolution.ndim != 2 or evolution.shape[0] != evolution.shape[1]:
            raise ConfigurationError(
                f"evolution matrix must be square, got {evolution.shape}"
            )
        process = _square("process noise", self.process_noise_cov, evolution.shape[0])
        if not is_psd(process):
            raise ConfigurationError("process noise covariance is not PSD")
        if not self.measurement_noise_var > 0:
            raise ConfigurationError(
                f"measurement noise variance must be > 0, got {self.measurement_noise_var}"
            )
        object.__setattr__(self, "evolution_matrix", evolution)
        object.__setattr__(self, "process_noise_cov", process)
        object.__setattr__(self, "measurement_noise_var", float(self.measurement_noise_var))

    @property
    def dim(self) -> int:
        return self.evolution_matrix.shape[0]


def random_walk_config(dim: int, process_noise: float, noise_var: float) -> KfConfig:
    """KfConfig with G = I and P^w = process_noise * I."""
    return KfConfig(np.eye(dim), process_noise * np.eye(dim), noise_var)


def kf_predict(belief: GaussianBelief, cfg: KfConfig) -> GaussianBelief:
    if cfg.dim != belief.dim:
        raise ConfigurationError(
            f"filter config has dimension {cfg.dim}, belief has {belief.dim}"
        )
    G = cfg.evolution_matrix
    return GaussianBelief(
        G @ belief.mean,
        symmetrize(G @ belief.covariance @ G.T + cfg.process_noise_cov),
    )


def _innovation_variance(belief: GaussianBelief, h: np.ndarray, noise_var: float):
    if h.shape != (belief.dim,):
        raise ConfigurationError(
            f"regressor has shape {h.shape}, expected {(belief.dim,)}"
        )
    if not np.all(np.isfinite(h)):
        raise ValidationError("regressor contains non-finite values")
    Ph = belief.covariance @ h
    z = float(h @ Ph) + noise_var
    if not z > 0:
        raise NumericalDegeneracyError(f"innovation variance {z} is not positive")
    return Ph, z


def kf_update(
    belief: GaussianBelief, h, y: float, noise_var: float
) -> Tuple[GaussianBelief, float, np.ndarray]:
    """
    Measurement update for the scalar observation y = h . theta + noise.

    :param belief: predicted belief
    :param h: regressor of the same length as the belief mean
    :param y: observation
    :param noise_var: measurement noise variance P^N
    :return: posterior belief, the prior residual y - h . mean, and the gain
    """
    if not noise_var > 0:
        raise ConfigurationError(f"measurement noise variance must be > 0, got {noise_var}")
    h = np.asarray(h, dtype=float)
    Ph, z = _innovation_variance(belief, h, noise_var)
    residual = float(y - h @ belief.mean)
    gain = Ph / z
    posterior = GaussianBelief(
        belief.mean + gain * residual,
        symmetrize(belief.covariance - np.outer(gain, Ph)),
    )
    return posterior, residual, gain


def kf_likelihood(belief: GaussianBelief, h, y: float, noise_var: float) -> float:
    """Gaussian density of the residual under the innovation variance."""
    h = np.asarray(h, dtype=float)
    _, z = _innovation_variance(belief, h, noise_var)
    residual = y - h @ belief.mean
    return float(norm.pdf(residual, loc=0.0, scale=np.sqrt(z)))


@dataclass(frozen=True, eq=False)
class MmaeBank:
    members: Tuple[Tuple[GaussianBelief, KfConfig], ...]
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(tuple(member) for member in self.members)
        weights = np.asarray(self.weights, dtype=float)
        if not members:
            raise ConfigurationError("a filter bank needs at least one member")
        if weights.shape != (len(members),):
            raise ConfigurationError(
                f"bank has {len(members)} members but {weights.shape} weights"
            )
        if np.any(weights < 0) or np.any(weights > 1) or abs(weights.sum() - 1) > 1e-12:
            raise ConfigurationError(f"bank weights are not on the simplex: {weights}")
        dims = {belief.dim for belief, _ in members} | {cfg.dim for _, cfg in members}
        if len(dims) != 1:
            raise ConfigurationError(f"bank members disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, members: Sequence[Tuple[GaussianBelief, KfConfig]]) -> "MmaeBank":
        return cls(tuple(members), np.full(len(members), 1.0 / len(members)))

    @property
    def beliefs(self) -> Tuple[GaussianBelief, ...]:
        return tuple(belief for belief, _ in self.members)

    def fused(self) -> GaussianBelief:
        return fuse(self.beliefs, self.weights)


def fuse(beliefs: Sequence[GaussianBelief], weights: np.ndarray) -> GaussianBelief:
    """Weighted mixture moments, including the spread of member means."""
    mean = np.asarray(weights) @ np.stack([b.mean for b in beliefs])
    cov = sum(
        w * (b.covariance + np.outer(b.mean - mean, b.mean - mean))
        for w, b in zip(weights, beliefs)
    )
    return GaussianBelief(mean, symmetrize(cov))


def mmae_step(bank: MmaeBank, h, y: float) -> Tuple[MmaeBank, GaussianBelief]:
    h = np.asarray(h, dtype=float)
    posteriors, likelihoods = [], []
    for belief, cfg in bank.members:
        predicted = kf_predict(belief, cfg)
        likelihoods.append(kf_likelihood(predicted, h, y, cfg.measurement_noise_var))
        posteriors.append(kf_update(predicted, h, y, cfg.measurement_noise_var)[0])

    likelihoods = np.asarray(likelihoods)
    unnormalized = bank.weights * likelihoods
    total = unnormalized.sum()
    if np.all(likelihoods <= LIKELIHOOD_FLOOR) or not total > 0:
        report(
            DiagnosticEvent.LIKELIHOOD_UNDERFLOW,
            "all %d filter likelihoods underflowed; keeping previous weights",
            len(likelihoods),
        )
        weights = bank.weights
    else:
        weights = unnormalized / total

    members = tuple((post, cfg) for post, (_, cfg) in zip(posteriors, bank.members))
    new_bank = MmaeBank(members, weights)
    return new_bank, fuse(posteriors, weights)


NoiseCov = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class MatrixBelief:
    """
    Belief over an L x L matrix F.

    ``covariance`` is either the dense L^2 x L^2 covariance of vec(F) or the
    L x L factor P of P kron I_L. Noise terms are either scalars (multiples of
    the identity) or dense matrices of shape L^2 x L^2 and L x L.
    """

    mean: np.ndarray
    covariance: np.ndarray
    process_noise_cov: NoiseCov
    measurement_noise_cov: NoiseCov
    decay: float = DEFAULT_DECAY

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.ndim != 2 or mean.shape[0] != mean.shape[1]:
            raise ConfigurationError(f"matrix belief mean must be square, got {mean.shape}")
        L = mean.shape[0]
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape not in ((L, L), (L * L, L * L)):
            raise ConfigurationError(
                f"matrix belief covariance has shape {cov.shape}; "
                f"expected {(L, L)} or {(L * L, L * L)}"
            )
        if not 0 < self.decay <= 1:
            raise ConfigurationError(f"decay must lie in (0, 1], got {self.decay}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "decay", float(self.decay))
        object.__setattr__(
            self, "process_noise_cov", self._noise("process noise", self.process_noise_cov, L * L)
        )
        object.__setattr__(
            self,
            "measurement_noise_cov",
            self._noise("measurement noise", self.measurement_noise_cov, L),
        )

    @staticmethod
    def _noise(name, value, size):
        if np.ndim(value) == 0:
            if not float(value) >= 0:
                raise ConfigurationError(f"{name} must be nonnegative, got {value}")
            return float(value)
        return _square(name, value, size)

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    @property
    def factored(self) -> bool:
        return (
            self.covariance.shape[0] == self.n_features
            and np.ndim(self.process_noise_cov) == 0
            and np.ndim(self.measurement_noise_cov) == 0
        )

    def full_covariance(self) -> np.ndarray:
        L = self.n_features
        if self.covariance.shape[0] == L:
            return np.kron(self.covariance, np.eye(L))
        return self.covariance

    def covariance_trace(self) -> float:
        L = self.n_features
        if self.covariance.shape[0] == L:
            return float(L * np.trace(self.covariance))
        return float(np.trace(self.covariance))

    def projected_variance(self, x, w) -> float:
        """Variance of the scalar w' F x under this belief."""
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        L = self.n_features
        if self.covariance.shape[0] == L:
            return float(x @ self.covariance @ x) * float(w @ w)
        g = np.kron(x, w)
        return float(g @ self.covariance @ g)

    def to_dense(self) -> "MatrixBelief":
        L = self.n_features
        process, measurement = self.process_noise_cov, self.measurement_noise_cov
        if np.ndim(process) == 0:
            process = process * np.eye(L * L)
        if np.ndim(measurement) == 0:
            measurement = measurement * np.eye(L)
        return replace(
            self,
            covariance=self.full_covariance(),
            process_noise_cov=process,
            measurement_noise_cov=measurement,
        )


def matrix_kf_update(mb: MatrixBelief, x, y) -> MatrixBelief:
    """
    Predict and update the belief over F from one pair y = F x + noise.

    :param mb: current belief
    :param x: input features phi(s)
    :param y: observed next features phi(s')
    :return: posterior belief
    """
    L = mb.n_features
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (L,) or y.shape != (L,):
        raise ConfigurationError(
            f"feature vectors have shapes {x.shape}, {y.shape}; expected {(L,)}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("matrix filter received non-finite features")
    if mb.factored:
        return _factored_update(mb, x, y)
    return _dense_update(mb.to_dense(), x, y)


def _factored_update(mb: MatrixBelief, x, y) -> MatrixBelief:
    L = mb.n_features
    decay = mb.decay
    P = decay * decay * mb.covariance + mb.process_noise_cov * np.eye(L)
    F = decay * mb.mean
    Px = P @ x
    z = float(x @ Px) + mb.measurement_noise_cov
    if not z > 0:
        raise NumericalDegeneracyError(f"innovation covariance {z} * I is not invertible")
    residual = y - F @ x
    return replace(
        mb,
        mean=F + np.outer(residual, Px) / z,
        covariance=symmetrize(P - np.outer(Px, Px) / z),
    )


def _dense_update(mb: MatrixBelief, x, y) -> MatrixBelief:
    L = mb.n_features
    decay = mb.decay
    S = decay * decay * mb.covariance + mb.process_noise_cov
    vec = (decay * mb.mean).reshape(-1, order="F")
    H = np.kron(x[None, :], np.eye(L))
    SHt = S @ H.T
    Z = H @ SHt + mb.measurement_noise_cov
    try:
        gain = la.solve(Z, SHt.T, assume_a="pos").T
    except la.LinAlgError as err:
        raise NumericalDegeneracyError(f"innovation covariance is not invertible: {err}") from err
    vec = vec + gain @ (y - H @ vec)
    return replace(
        mb,
        mean=vec.reshape((L, L), order="F"),
        covariance=symmetrize(S - gain @ SHt.T),
    )
