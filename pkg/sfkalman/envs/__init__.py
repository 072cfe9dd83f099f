from sfkalman.envs.lock import DIAL_NAMES, LockTask, lock_step
from sfkalman.envs.nav import ACTIONS, NavTask, Rect, nav_step
from sfkalman.envs.taskspec import (
    BUILTIN_TASKS,
    FeatureGrid,
    TaskSpec,
    builtin_task,
    load_task,
    save_task,
    validate_task,
)

__all__ = [
    "ACTIONS",
    "BUILTIN_TASKS",
    "DIAL_NAMES",
    "FeatureGrid",
    "LockTask",
    "NavTask",
    "Rect",
    "TaskSpec",
    "builtin_task",
    "load_task",
    "lock_step",
    "nav_step",
    "save_task",
    "validate_task",
]
