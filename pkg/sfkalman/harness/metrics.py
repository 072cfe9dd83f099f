"""
Aggregation of run records and the CSV / JSON outputs of an experiment.

CSV files are written with fixed ``%.6f`` formatting and ``\\n`` line endings
so repeated runs produce identical bytes. Timing only goes to the run report.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
from monty.serialization import dumpfn

from sfkalman.errors import ValidationError

SUMMARY_HEADER = ("episode", "mean_length", "std_length")
EPISODES_HEADER = ("seed", "episode", "length", "return")
BOUND_HEADER = ("seed", "episode", "mean_bound", "final_bound")
SWEEP_HEADER = ("param", "value", "grand_mean", "grand_std")


def _fmt(x: float) -> str:
    return "%.6f" % x


@dataclass
class Summary:
    per_episode: pd.DataFrame
    grand_mean: float
    grand_std: float
    n_seeds: int


def records_frame(records) -> pd.DataFrame:
    """Long format, one row per (seed, episode); episodes count from 1."""
    rows = [
        (run.seed, i, ep.length, ep.total_return)
        for run in sorted(records, key=lambda run: run.seed)
        for i, ep in enumerate(run.episodes, start=1)
    ]
    return pd.DataFrame(rows, columns=list(EPISODES_HEADER))


def aggregate(records) -> Summary:
    """
    Cross-seed episode statistics.

    The grand mean is the mean over episodes of the per-episode cross-seed
    mean; the grand std is the cross-seed std of per-run mean lengths. Both
    stds use ddof=0.
    """
    records = list(records)
    if not records:
        raise ValidationError("cannot aggregate an empty list of run records")
    counts = {len(run.episodes) for run in records}
    if len(counts) != 1:
        raise ValidationError(f"runs disagree on the episode count: {sorted(counts)}")
    if 0 in counts:
        raise ValidationError("runs hold no episodes")
    if len({run.seed for run in records}) != len(records):
        raise ValidationError("duplicate seeds among run records")

    frame = records_frame(records)
    lengths = frame.pivot(index="episode", columns="seed", values="length").astype(float)
    per_episode = pd.DataFrame(
        {
            "episode": lengths.index.to_numpy(),
            "mean_length": lengths.mean(axis=1).to_numpy(),
            "std_length": lengths.std(axis=1, ddof=0).to_numpy(),
        }
    )
    run_means = lengths.mean(axis=0)
    return Summary(
        per_episode,
        float(per_episode["mean_length"].mean()),
        float(run_means.std(ddof=0)),
        lengths.shape[1],
    )


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_csv(summary: Summary, path):
    rows = [
        (str(int(ep)), _fmt(mean), _fmt(std))
        for ep, mean, std in summary.per_episode[list(SUMMARY_HEADER)].itertuples(index=False)
    ]
    rows.append(("grand", _fmt(summary.grand_mean), _fmt(summary.grand_std)))
    _write_rows(path, SUMMARY_HEADER, rows)


def emit_plotdata(records, path):
    frame = records_frame(records)
    _write_rows(
        path,
        EPISODES_HEADER,
        (
            (str(seed), str(ep), str(length), _fmt(ret))
            for seed, ep, length, ret in frame.itertuples(index=False)
        ),
    )


def emit_bounds(records, path):
    rows = []
    for run in sorted(records, key=lambda run: run.seed):
        for i, ep in enumerate(run.episodes, start=1):
            if not ep.bound_trace:
                continue
            rows.append(
                (str(run.seed), str(i), _fmt(np.mean(ep.bound_trace)), _fmt(ep.bound_trace[-1]))
            )
    _write_rows(path, BOUND_HEADER, rows)


def emit_sweep(points: List[Tuple[str, str, Summary]], path):
    _write_rows(
        path,
        SWEEP_HEADER,
        ((param, value, _fmt(s.grand_mean), _fmt(s.grand_std)) for param, value, s in points),
    )


def write_run_report(records, path):
    dumpfn(
        [
            {
                "seed": run.seed,
                "episodes": len(run.episodes),
                "mean_step_seconds": run.step_seconds,
                "events": run.events,
            }
            for run in sorted(records, key=lambda run: run.seed)
        ],
        os.fspath(path),
        indent=2,
    )
