import numpy as np
import pytest

from sfkalman.agent import new_agent
from sfkalman.envmodel import new_reward_model, new_transition_model
from sfkalman.features import default_rbf_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_agent(n_actions=4, order=3, gamma=0.95, **kwargs):
    """Nav-style agent on a 2-D grid of order**2 bases over [0, 1]^2."""
    fm = default_rbf_grid(2, order, 0.0, 1.0)
    L = fm.n_features
    rm = new_reward_model(
        n_actions, L, prior_var=0.1, process_noise=0.01, noise_vars=(0.2,)
    )
    tm = new_transition_model(
        n_actions,
        L,
        prior_scale=0.02,
        prior_var=5.0,
        process_noise=0.6,
        measurement_noise=1.0,
    )
    return new_agent(fm, rm, tm, gamma, **kwargs)


@pytest.fixture
def agent():
    return small_agent()
