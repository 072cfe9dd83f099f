"""
Brute-force checks of the closed-form successor machinery.

Each suite draws random instances, compares the closed form with an
independent computation (Neumann series, fixed-point iteration, value
iteration) and returns an OracleResult. The ``oracle`` CLI command and the
tests both run them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from sfkalman.successor import (
    block_transition,
    error_bound,
    q_weights,
    states_reaching,
    successor_features,
    tabular_sr,
    value_weights,
)


@dataclass
class OracleResult:
    name: str
    trials: int
    failures: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name}: {status} trials={self.trials} failures={self.failures} "
            f"worst={self.worst:.3e} tol={self.tolerance:.1e}"
        )


def random_stochastic(n: int, rng: np.random.Generator) -> np.ndarray:
    T = rng.dirichlet(np.ones(n), size=n)
    return T / T.sum(axis=1, keepdims=True)


def sf_fixed_point_suite(trials: int = 1000, rng: Optional[np.random.Generator] = None) -> OracleResult:
    """m = phi + gamma F m for random F with rho(gamma F) <= 0.95."""
    rng = np.random.default_rng(0) if rng is None else rng
    tol, worst, failures = 1e-9, 0.0, 0
    for _ in range(trials):
        L = int(rng.integers(2, 17))
        gamma = float(rng.choice([0.9, 0.95, 0.99]))
        F = rng.normal(size=(L, L))
        rho = np.abs(np.linalg.eigvals(F)).max()
        F *= rng.uniform(0.05, 0.95) / (gamma * rho)
        phi = rng.uniform(0.0, 1.0, size=L)
        m = successor_features(F, phi, gamma, guard=False)
        err = float(np.abs(m - phi - gamma * F @ m).max())
        worst = max(worst, err)
        failures += err > tol
    return OracleResult("sf-fixed-point", trials, failures, worst, tol)


def tabular_sr_suite(trials: int = 100, rng: Optional[np.random.Generator] = None) -> OracleResult:
    """Closed-form SR against the recursion M <- I + gamma T M."""
    rng = np.random.default_rng(1) if rng is None else rng
    tol, worst, failures = 1e-6, 0.0, 0
    for _ in range(trials):
        n = int(rng.integers(2, 31))
        gamma = float(rng.uniform(0.5, 0.95))
        T = random_stochastic(n, rng)
        M = tabular_sr(T, gamma).sr
        iterate = np.eye(n)
        k = 0
        while gamma ** (k + 1) / (1.0 - gamma) > 1e-9:
            iterate = np.eye(n) + gamma * T @ iterate
            k += 1
        err = float(np.abs(M - iterate).max())
        worst = max(worst, err)
        failures += err > tol
    return OracleResult("tabular-sr", trials, failures, worst, tol)


def corridor(n: int) -> np.ndarray:
    """Move-right policy on a line of n states; the last state absorbs."""
    T = np.zeros((n, n))
    for i in range(n - 1):
        T[i, i + 1] = 1.0
    T[n - 1, n - 1] = 1.0
    return T


def barrier_suite(trials: int = 20, rng: Optional[np.random.Generator] = None) -> OracleResult:
    """
    Blocking one transition must change the SR row of every state upstream
    of it, and only those rows.
    """
    rng = np.random.default_rng(2) if rng is None else rng
    failures, worst = 0, np.inf
    for trial in range(trials):
        if trial % 2 == 0:
            n = int(rng.integers(4, 11))
            T = corridor(n)
            source = int(rng.integers(0, n - 2))
            target = source + 1
        else:
            n = int(rng.integers(4, 11))
            T = random_stochastic(n, rng) * (rng.random((n, n)) < 0.4)
            T[np.arange(n), (np.arange(n) + 1) % n] += 1.0
            T /= T.sum(axis=1, keepdims=True)
            source = int(rng.integers(0, n))
            target = (source + 1) % n
        gamma = float(rng.uniform(0.5, 0.95))
        before = tabular_sr(T, gamma).sr
        after = tabular_sr(block_transition(T, source, target), gamma).sr
        delta = np.abs(after - before).max(axis=1)
        upstream = states_reaching(T, [source])
        changed = delta[list(upstream)]
        others = np.delete(delta, list(upstream))
        worst = min(worst, float(changed.min()))
        failures += bool(np.any(changed <= 0) or np.any(others > 1e-12))
    return OracleResult("barrier", trials, failures, worst, 0.0)


def q_value_iteration(P, R, policy, gamma, tol=1e-13, max_iter=100_000) -> np.ndarray:
    """
    Q^pi for a fixed action distribution ``policy`` by repeated Bellman backups.

    :param P: (n_actions, n_states, n_states) transition kernels
    :param R: (n_states, n_actions) expected rewards
    :return: (n_states, n_actions) Q values
    """
    Q = np.zeros_like(R)
    for _ in range(max_iter):
        V = Q @ policy
        updated = R + gamma * np.stack([P[a] @ V for a in range(P.shape[0])], axis=1)
        if np.abs(updated - Q).max() < tol:
            return updated
        Q = updated
    return Q


def error_bound_suite(trials: int = 100, rng: Optional[np.random.Generator] = None) -> OracleResult:
    """
    Random 20-state MDPs with one-hot features and a perturbed model; the
    measured Q error must never exceed the bound.
    """
    rng = np.random.default_rng(3) if rng is None else rng
    n, n_actions = 20, 3
    failures, worst = 0, 0.0
    for _ in range(trials):
        gamma = float(rng.choice([0.5, 0.8, 0.9]))
        P = np.stack([random_stochastic(n, rng) for _ in range(n_actions)])
        R = rng.uniform(0.0, 1.0, size=(n, n_actions))
        policy = rng.dirichlet(np.ones(n_actions))

        thetas = R.T + rng.normal(scale=0.05, size=(n_actions, n))
        Fs = np.transpose(P, (0, 2, 1)) + rng.normal(scale=0.01, size=(n_actions, n, n))
        theta_pi = policy @ thetas
        F_pi = np.tensordot(policy, Fs, axes=1)

        v = value_weights(theta_pi, F_pi, gamma, guard=False)
        q = np.stack(
            [q_weights(thetas[a], theta_pi, Fs[a], F_pi, gamma, guard=False) for a in range(n_actions)],
            axis=1,
        )
        Q = q_value_iteration(P, R, policy, gamma)

        e_r = float(np.abs(R.T - thetas).max())
        e_p = float(
            max(np.linalg.norm(P[a][s] - Fs[a][:, s]) for a in range(n_actions) for s in range(n))
        )
        bound = error_bound(e_r, e_p, v, gamma)
        err = float(np.abs(Q - q).max())
        worst = max(worst, err / bound)
        failures += err > bound * (1 + 1e-9) + 1e-10
    return OracleResult("error-bound", trials, failures, worst, 1.0)


SUITES: Dict[str, Callable[..., OracleResult]] = {
    "sf-fixed-point": sf_fixed_point_suite,
    "tabular-sr": tabular_sr_suite,
    "barrier": barrier_suite,
    "error-bound": error_bound_suite,
}
