"""
Evaluate the experiment-scale acceptance checks on a results directory
written by reproduce.sh. Missing experiments are reported as SKIP.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import pandas as pd
from monty.serialization import loadfn
from scipy.stats import ttest_ind

logger = logging.getLogger(__name__)


def grand_mean(run_dir: Path) -> float:
    summary = pd.read_csv(run_dir / "summary.csv", dtype={"episode": str})
    return float(summary.loc[summary["episode"] == "grand", "mean_length"].iloc[0])


def per_episode(run_dir: Path) -> pd.Series:
    summary = pd.read_csv(run_dir / "summary.csv", dtype={"episode": str})
    summary = summary[summary["episode"] != "grand"]
    return summary["mean_length"].reset_index(drop=True)


def run_means(run_dir: Path) -> pd.Series:
    episodes = pd.read_csv(run_dir / "episodes.csv")
    return episodes.groupby("seed")["length"].mean()


def cap_fraction(run_dir: Path) -> float:
    cap = loadfn(str(run_dir / "config.json"))["episode_cap"]
    episodes = pd.read_csv(run_dir / "episodes.csv")
    return float((episodes["length"] >= cap).mean())


def step_seconds(run_dir: Path) -> float:
    return float(pd.DataFrame(loadfn(str(run_dir / "runs.json")))["mean_step_seconds"].mean())


def scratch_a(root):
    g = grand_mean(root / "A")
    lengths = per_episode(root / "A")
    first, last = lengths.iloc[:100].mean(), lengths.iloc[-100:].mean()
    return g <= 95 and last <= 0.5 * first, f"grand={g:.1f} first100={first:.1f} last100={last:.1f}"


def transfer_b(root):
    g, scratch = grand_mean(root / "A-B"), grand_mean(root / "A")
    return g <= 0.6 * scratch, f"transfer={g:.1f} scratch={scratch:.1f}"


def transfer_c(root):
    g, scratch = grand_mean(root / "A-C"), grand_mean(root / "A")
    capped = cap_fraction(root / "A-C-uatd")
    ok = g <= 0.7 * scratch and capped >= 0.8
    return ok, f"transfer={g:.1f} scratch={scratch:.1f} td-sf capped={capped:.0%}"


def lock_tasks(root):
    scratch = grand_mean(root / "lock1")
    to2, to3 = grand_mean(root / "lock1-lock2"), grand_mean(root / "lock1-lock3")
    ok = scratch <= 20 and to2 <= 0.7 * scratch and to3 >= scratch
    return ok, f"lock1={scratch:.1f} ->lock2={to2:.1f} ->lock3={to3:.1f}"


def ablation(root):
    notes, ok = [], True
    for task in ("A", "lock1"):
        result = ttest_ind(
            run_means(root / task), run_means(root / f"{task}-eps"), equal_var=False, alternative="less"
        )
        ok &= bool(result.pvalue < 0.05)
        notes.append(f"{task}: p={result.pvalue:.3g}")
    return ok, " ".join(notes)


def sweep_l(root):
    small, large = grand_mean(root / "sweep-L" / "L_9"), grand_mean(root / "sweep-L" / "L_36")
    return large <= 0.75 * small, f"L=9 {small:.1f} L=36 {large:.1f}"


def complexity(root):
    small = step_seconds(root / "sweep-L" / "L_9")
    large = step_seconds(root / "sweep-L" / "L_36")
    # seconds per seed of the L=16 run on task A
    steps = pd.read_csv(root / "A" / "episodes.csv").groupby("seed")["length"].sum()
    run_seconds = float((steps * step_seconds(root / "A")).max())
    ok = large <= 30 * small and run_seconds < 600
    return ok, f"step time ratio L=36/L=9 = {large / small:.1f}, slowest task A seed {run_seconds:.0f}s"


CHECKS = {
    "task A from scratch": scratch_a,
    "transfer A -> B": transfer_b,
    "transfer A -> C": transfer_c,
    "combination lock transfer": lock_tasks,
    "ablation ordering": ablation,
    "feature count sensitivity": sweep_l,
    "per-step complexity": complexity,
}


def main(args):
    root = Path(args.results)
    failed = False
    for name, check in CHECKS.items():
        try:
            ok, note = check(root)
        except FileNotFoundError as err:
            print(f"SKIP {name}: {err.filename} missing")
            continue
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {note}")
    return 1 if failed else 0


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument("results", nargs="?", default=os.environ.get("SFKALMAN_OUTPUT_DIR", "results"))
    return parser.parse_args()


if __name__ == "__main__":
    logging.basicConfig(level=os.environ.get("LOGLEVEL", "INFO"))
    sys.exit(main(parse_args()))
