"""
Command-line entry point.

    sfkalman train    --task A --out results/A
    sfkalman transfer --from results/A/checkpoints --task B --out results/B
    sfkalman ablate   --variant mbsf-eps --task A --out results/A-eps
    sfkalman sweep    --param L --values 9,16,25,36 --task A --out results/sweep-L
    sfkalman oracle   --suite all
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from monty.serialization import dumpfn

from sfkalman.agent import PolicyKind
from sfkalman.errors import ConfigurationError, SfkalmanError
from sfkalman.harness.config import ExperimentConfig, make_config
from sfkalman.harness.metrics import (
    aggregate,
    emit_bounds,
    emit_csv,
    emit_plotdata,
    emit_sweep,
    write_run_report,
)
from sfkalman.harness.runner import run_experiment
from sfkalman.oracles import SUITES

logger = logging.getLogger(__name__)

VARIANTS = {
    "mbsf-eps": PolicyKind.EPSILON_GREEDY,
    "uatd-sf": PolicyKind.UA_TD_SF,
}
SWEEP_PARAMS = {"L": "n_features", "pn": "reward_noise_var"}


def _jobs(value: str):
    if value == "max":
        return value
    try:
        jobs = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'max', got {value!r}")
    if jobs < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'max', got {value!r}")
    return jobs


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return n


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--task", help="builtin task name or task file")
    parser.add_argument(
        "--out",
        default=os.environ.get("SFKALMAN_OUTPUT_DIR", "results"),
        help="Output directory (default: $SFKALMAN_OUTPUT_DIR or ./results)",
    )
    parser.add_argument("--seeds", type=_positive, help="Run seeds 0..N-1")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--jobs", type=_jobs, help="Worker processes, or 'max'")
    parser.add_argument("--episodes", type=_positive)
    parser.add_argument("--episode-cap", type=_positive)
    parser.add_argument(
        "--record-bound",
        action="store_true",
        default=None,
        help="Record the per-step Q error bound and write bound.csv",
    )
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    return parser


def _transfer_args(parser: argparse.ArgumentParser, required: bool):
    parser.add_argument(
        "--from",
        dest="source",
        required=required,
        help="Checkpoint file, or a directory of seed_<n>.json checkpoints",
    )
    parser.add_argument(
        "--shared-checkpoint",
        action="store_true",
        default=None,
        help="Every seed starts from the single checkpoint file given to --from",
    )


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="sfkalman",
        description="Uncertainty-aware model-based successor-feature experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", parents=[common], help="Train from scratch")
    train.set_defaults(func=cmd_train)

    transfer = sub.add_parser("transfer", parents=[common], help="Train from checkpoints")
    _transfer_args(transfer, required=True)
    transfer.set_defaults(func=cmd_train)

    ablate = sub.add_parser("ablate", parents=[common], help="Train an ablated agent")
    ablate.add_argument("--variant", choices=sorted(VARIANTS), required=True)
    _transfer_args(ablate, required=False)
    ablate.set_defaults(func=cmd_train)

    sweep = sub.add_parser("sweep", parents=[common], help="Sensitivity sweep")
    sweep.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True)
    sweep.add_argument("--values", required=True, help="Comma-separated values")
    sweep.set_defaults(func=cmd_sweep)

    oracle = sub.add_parser("oracle", help="Run the numerical oracle suites")
    oracle.add_argument("--suite", choices=["all", *SUITES], default="all")
    oracle.add_argument("--trials", type=_positive, help="Trials per suite")
    oracle.set_defaults(func=cmd_oracle)

    return parser.parse_args(argv)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    variant = getattr(args, "variant", None)
    return {
        "seeds": None if args.seeds is None else list(range(args.seeds)),
        "jobs": args.jobs,
        "episodes": args.episodes,
        "episode_cap": args.episode_cap,
        "record_bound": args.record_bound,
        "checkpoint_in": getattr(args, "source", None),
        "shared_checkpoint": getattr(args, "shared_checkpoint", None),
        "agent": None if variant is None else VARIANTS[variant],
    }


def run_and_write(cfg: ExperimentConfig, out: Path, progress: bool = True):
    """Run every seed of ``cfg`` and write the output directory."""
    out.mkdir(parents=True, exist_ok=True)
    dumpfn(cfg.to_dict(), str(out / "config.json"), indent=2)
    records = run_experiment(cfg, checkpoint_dir=out / "checkpoints", progress=progress)
    summary = aggregate(records)
    emit_csv(summary, out / "summary.csv")
    emit_plotdata(records, out / "episodes.csv")
    write_run_report(records, out / "runs.json")
    if cfg.record_bound:
        emit_bounds(records, out / "bound.csv")
    logger.info(
        "%s: grand mean episode length %.2f +- %.2f over %d seeds -> %s",
        cfg.task,
        summary.grand_mean,
        summary.grand_std,
        summary.n_seeds,
        out,
    )
    return summary


def cmd_train(args: argparse.Namespace) -> int:
    cfg = make_config(args.task, args.config, _overrides(args))
    run_and_write(cfg, Path(args.out), progress=not args.no_progress)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    key = SWEEP_PARAMS[args.param]
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigurationError("--values needs at least one value")
    out = Path(args.out)
    points = []
    for value in values:
        try:
            parsed = int(value) if key == "n_features" else float(value)
        except ValueError as err:
            raise ConfigurationError(f"bad --values entry for {args.param}: {value!r}") from err
        overrides = _overrides(args)
        overrides[key] = parsed
        cfg = make_config(args.task, args.config, overrides)
        summary = run_and_write(cfg, out / f"{args.param}_{value}", progress=not args.no_progress)
        points.append((args.param, value, summary))
    emit_sweep(points, out / "sweep.csv")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        result = SUITES[name]() if args.trials is None else SUITES[name](trials=args.trials)
        print(result)
        failed |= not result.passed
    return 1 if failed else 0


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("LOGLEVEL", "INFO"))
    args = parse_args(argv)
    try:
        return args.func(args)
    except (SfkalmanError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
