"""
Closed-form successor features, value and action-value weights from a
learned linear model, the Q-error bound, and the tabular successor
representation used as an oracle.

All solves go through one LU factorization of (I - gamma F^pi).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg as la

from sfkalman.diagnostics import DiagnosticEvent, report
from sfkalman.errors import DomainError, SolverError, ValidationError

CONDITION_LIMIT = 1e12
SHRINK_MARGIN = 0.99
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SfSolution:
    v_weights: np.ndarray
    q_weights: np.ndarray
    resolvent: np.ndarray
    gamma: float
    shrink: float = 1.0

    def q_values(self, phi) -> np.ndarray:
        return self.q_weights @ np.asarray(phi)


@dataclass(frozen=True, eq=False)
class TabularSr:
    transition: np.ndarray
    sr: np.ndarray
    gamma: float


def _check_gamma(gamma):
    if not 0 <= gamma < 1:
        raise DomainError(f"discount must lie in [0, 1), got {gamma}")


def _factorize(F_pi, gamma: float, guard: bool):
    """
    LU factors of I - gamma * s * F^pi and the shrink s applied.

    With ``guard`` a spectral radius of gamma F at or above one, or a
    condition number above CONDITION_LIMIT, shrinks F by 0.99 / (gamma rho)
    for this solve only.
    """
    _check_gamma(gamma)
    F_pi = np.asarray(F_pi, dtype=float)
    if not np.all(np.isfinite(F_pi)):
        raise ValidationError("transition matrix contains non-finite values")
    eye = np.eye(F_pi.shape[0])
    A = eye - gamma * F_pi
    shrink = 1.0
    if guard:
        rho = float(np.abs(np.linalg.eigvals(F_pi)).max())
        cond = np.linalg.cond(A)
        if gamma * rho >= 1.0 or not cond <= CONDITION_LIMIT:
            if gamma * rho > 0:
                shrink = min(1.0, SHRINK_MARGIN / (gamma * rho))
            report(
                DiagnosticEvent.RESOLVENT_SHRINK,
                "resolvent guard: rho(gamma F)=%.4f cond=%.3e, shrinking F by %.4f",
                gamma * rho,
                cond,
                shrink,
            )
            A = eye - gamma * shrink * F_pi
    cond = np.linalg.cond(A)
    if not cond <= CONDITION_LIMIT:
        raise SolverError("I - gamma F is ill-conditioned", cond)
    return la.lu_factor(A), shrink


def successor_features(F_pi, phi_s, gamma: float, guard: bool = True) -> np.ndarray:
    """m = (I - gamma F^pi)^{-1} phi(s)"""
    lu, _ = _factorize(F_pi, gamma, guard)
    return la.lu_solve(lu, np.asarray(phi_s, dtype=float))


def value_weights(theta_pi, F_pi, gamma: float, guard: bool = True) -> np.ndarray:
    """v = (I - gamma F^pi)^{-T} theta^pi, so that V(s) = v . phi(s)."""
    lu, _ = _factorize(F_pi, gamma, guard)
    return la.lu_solve(lu, np.asarray(theta_pi, dtype=float), trans=1)


def q_weights(theta_a, theta_pi, F_a, F_pi, gamma: float, guard: bool = True) -> np.ndarray:
    v = value_weights(theta_pi, F_pi, gamma, guard)
    return np.asarray(theta_a, dtype=float) + gamma * np.asarray(F_a).T @ v


def solve_sf(
    thetas: Sequence[np.ndarray],
    theta_pi,
    F_as: Sequence[np.ndarray],
    F_pi,
    gamma: float,
    guard: bool = True,
) -> SfSolution:
    """
    Value weights, per-action Q weights and the resolvent from a single
    factorization.

    :param thetas: reward weights theta^a, one per action
    :param theta_pi: policy reward weights
    :param F_as: transition matrices F^a, one per action
    :param F_pi: policy transition matrix
    :param gamma: discount
    :param guard: apply the spectral-radius guard
    :return: SfSolution with q_weights stacked as (n_actions, L)
    """
    lu, shrink = _factorize(F_pi, gamma, guard)
    v = la.lu_solve(lu, np.asarray(theta_pi, dtype=float), trans=1)
    q = np.stack([np.asarray(t) + gamma * np.asarray(F).T @ v for t, F in zip(thetas, F_as)])
    resolvent = la.lu_solve(lu, np.eye(len(v)))
    return SfSolution(v, q, resolvent, gamma, shrink)


def error_bound(e_r: float, e_p: float, v, gamma: float) -> float:
    """Upper bound (e^R + gamma |v| e^P) / (1 - gamma) on the Q approximation error."""
    if not 0 <= gamma < 1:
        raise DomainError(f"error bound needs gamma < 1, got {gamma}")
    if e_r < 0 or e_p < 0:
        raise DomainError(f"residual maxima must be nonnegative, got {e_r}, {e_p}")
    return (e_r + gamma * float(np.linalg.norm(v)) * e_p) / (1.0 - gamma)


def validate_stochastic(T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValidationError(f"transition matrix must be square, got {T.shape}")
    if np.any(T < 0):
        raise ValidationError("transition matrix has negative entries")
    row_error = np.abs(T.sum(axis=1) - 1.0).max()
    if row_error > STOCHASTIC_TOL:
        raise ValidationError(f"transition rows do not sum to 1 (max error {row_error:.3e})")
    return T


def tabular_sr(T, gamma: float) -> TabularSr:
    """M = (I - gamma T)^{-1} for a row-stochastic T."""
    T = validate_stochastic(T)
    _check_gamma(gamma)
    eye = np.eye(T.shape[0])
    return TabularSr(T, la.solve(eye - gamma * T, eye), gamma)


def tabular_value(M: TabularSr, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (M.sr.shape[0],):
        raise ValidationError(
            f"reward vector has shape {r.shape}, expected {(M.sr.shape[0],)}"
        )
    return M.sr @ r


def block_transition(T, source: int, target: int) -> np.ndarray:
    """Redirect the source -> target probability mass back onto source."""
    T = np.array(validate_stochastic(T))
    T[source, source] += T[source, target]
    T[source, target] = 0.0
    return T


def states_reaching(T, targets: Sequence[int]) -> Tuple[int, ...]:
    """States with a positive-probability path into any of ``targets``."""
    T = np.asarray(T)
    reach = set(targets)
    frontier = list(targets)
    while frontier:
        node = frontier.pop()
        for pred in np.nonzero(T[:, node] > 0)[0]:
            if int(pred) not in reach:
                reach.add(int(pred))
                frontier.append(int(pred))
    return tuple(sorted(reach))
