from sfkalman.harness.checkpoint import load_checkpoint, save_checkpoint
from sfkalman.harness.config import ExperimentConfig, for_task, load_config, make_config
from sfkalman.harness.metrics import Summary, aggregate, emit_csv, emit_plotdata
from sfkalman.harness.runner import RunRecord, run_experiment, run_seed

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "Summary",
    "aggregate",
    "emit_csv",
    "emit_plotdata",
    "for_task",
    "load_checkpoint",
    "load_config",
    "make_config",
    "run_experiment",
    "run_seed",
    "save_checkpoint",
]
