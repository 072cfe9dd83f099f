import os

import numpy as np
import pytest

import sfkalman
from sfkalman.harness.config import for_task
from sfkalman.harness.metrics import aggregate
from sfkalman.harness.runner import resolve_jobs, run_experiment


def test_blas_threads_capped_on_import():
    for name in sfkalman.THREAD_ENV_VARS:
        assert os.environ.get(name)


def test_resolve_jobs():
    assert resolve_jobs(1, 20) == 1
    assert resolve_jobs(8, 3) == 3
    assert 1 <= resolve_jobs("max", 20) <= 20


def test_worker_pool_matches_serial_run():
    overrides = dict(seeds=[0, 1, 2], episodes=3, episode_cap=20)
    serial = run_experiment(for_task("lock1", jobs=1, **overrides), progress=False)
    pooled = run_experiment(for_task("lock1", jobs=2, **overrides), progress=False)
    assert [run.seed for run in pooled] == [0, 1, 2]
    for a, b in zip(serial, pooled):
        assert [e.length for e in a.episodes] == [e.length for e in b.episodes]
        assert a.events == b.events
    first, second = aggregate(serial), aggregate(pooled)
    assert first.grand_mean == second.grand_mean
    assert first.grand_std == second.grand_std
    assert first.per_episode.equals(second.per_episode)


@pytest.mark.slow
def test_lock1_episodes_get_shorter():
    cfg = for_task("lock1", seeds=[0, 1])
    summary = aggregate(run_experiment(cfg, progress=False))
    lengths = summary.per_episode["mean_length"].to_numpy()
    k = 20
    assert np.mean(lengths[-k:]) < np.mean(lengths[:k])
