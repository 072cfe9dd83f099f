"""
Declarative task documents.

A TaskSpec is a JSON document with the keys

    format_version  int, currently 1
    name            task name
    family          "nav" or "lock"
    episodes        episodes per run
    episode_cap     step cap per episode
    features        {"order", "lo", "hi", "inclusive", "dims"}: default RBF grid
    environment     family block, see below

The nav block holds ``barriers`` (list of [x0, y0, x1, y1]), ``goal_center``,
``goal_radius``, ``step_size``, ``slip_prob`` and ``bounds`` ([[lo], [hi]]).
The lock block holds ``controllable`` and ``random`` (dial names),
``directions``, ``reward`` and ``start`` (dial name -> digit) and ``modulus``.
Dial names are left, middle and right.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from monty.serialization import dumpfn, loadfn

from sfkalman.errors import UnknownTaskError, ValidationError
from sfkalman.envs.lock import DIAL_NAMES, LockTask
from sfkalman.envs.nav import NavTask, Rect
from sfkalman.features import FeatureMap, default_rbf_grid

FORMAT_VERSION = 1
TASK_DIR = Path(__file__).parent / "tasks"
BUILTIN_TASKS = ("A", "B", "C", "lock1", "lock2", "lock3")
FAMILIES = ("nav", "lock")

REQUIRED_KEYS = ("format_version", "name", "family", "episodes", "episode_cap", "features", "environment")
FEATURE_KEYS = ("order", "lo", "hi", "inclusive", "dims")


@dataclass(frozen=True)
class FeatureGrid:
    order: int
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    inclusive: bool = False
    dims: Optional[Tuple[int, ...]] = None

    @property
    def state_dim(self) -> int:
        return len(self.lo)

    def order_for(self, n_features: int) -> int:
        order = round(n_features ** (1.0 / self.state_dim))
        if order**self.state_dim != n_features:
            raise ValidationError(
                f"L={n_features} is not a perfect power {self.state_dim} grid"
            )
        return order

    def build(
        self,
        n_features: Optional[int] = None,
        variance: Optional[float] = None,
        lr_mu: float = 0.001,
        lr_sigma: float = 0.001,
    ) -> FeatureMap:
        order = self.order if n_features is None else self.order_for(n_features)
        return default_rbf_grid(
            self.state_dim,
            order,
            self.lo,
            self.hi,
            inclusive=self.inclusive,
            variance=variance,
            lr_mu=lr_mu,
            lr_sigma=lr_sigma,
            dims=self.dims,
        )


@dataclass(frozen=True)
class TaskSpec:
    name: str
    family: str
    episodes: int
    episode_cap: int
    features: FeatureGrid
    environment: Dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TaskSpec":
        for key in REQUIRED_KEYS:
            if key not in d:
                raise ValidationError(f"task document missing required field: {key}")
        if d["format_version"] != FORMAT_VERSION:
            raise ValidationError(
                f"task format_version {d['format_version']} is not supported "
                f"(expected {FORMAT_VERSION})"
            )
        if d["family"] not in FAMILIES:
            raise ValidationError(f"unknown task family {d['family']!r}")
        feats = d["features"]
        for key in FEATURE_KEYS:
            if key not in feats:
                raise ValidationError(f"task features missing required field: {key}")
        grid = FeatureGrid(
            order=int(feats["order"]),
            lo=tuple(float(x) for x in feats["lo"]),
            hi=tuple(float(x) for x in feats["hi"]),
            inclusive=bool(feats["inclusive"]),
            dims=None if feats["dims"] is None else tuple(int(x) for x in feats["dims"]),
        )
        if len(grid.lo) != len(grid.hi):
            raise ValidationError("feature bounds lo and hi differ in length")
        if int(d["episodes"]) < 1 or int(d["episode_cap"]) < 1:
            raise ValidationError("episodes and episode_cap must be positive")
        return cls(
            name=str(d["name"]),
            family=d["family"],
            episodes=int(d["episodes"]),
            episode_cap=int(d["episode_cap"]),
            features=grid,
            environment=dict(d["environment"]),
            format_version=d["format_version"],
        )

    def to_dict(self) -> Dict[str, Any]:
        grid = asdict(self.features)
        grid["lo"], grid["hi"] = list(grid["lo"]), list(grid["hi"])
        grid["dims"] = None if grid["dims"] is None else list(grid["dims"])
        return {
            "format_version": self.format_version,
            "name": self.name,
            "family": self.family,
            "episodes": self.episodes,
            "episode_cap": self.episode_cap,
            "features": grid,
            "environment": self.environment,
        }

    def build(self) -> Union[NavTask, LockTask]:
        return validate_task(self)


def _dial(name: str) -> int:
    if name not in DIAL_NAMES:
        raise ValidationError(f"unknown dial {name!r}; expected one of {DIAL_NAMES}")
    return DIAL_NAMES.index(name)


def _nav_task(name: str, env: Dict[str, Any]) -> NavTask:
    bounds = env.get("bounds", [[0.0, 0.0], [1.0, 1.0]])
    try:
        barriers = tuple(Rect(*map(float, rect)) for rect in env.get("barriers", []))
        return NavTask(
            barriers=barriers,
            goal_center=tuple(env["goal_center"]),
            goal_radius=float(env.get("goal_radius", 0.1)),
            step_size=float(env.get("step_size", 0.05)),
            slip_prob=float(env.get("slip_prob", 0.05)),
            lo=tuple(map(float, bounds[0])),
            hi=tuple(map(float, bounds[1])),
            name=name,
        )
    except (KeyError, TypeError) as err:
        raise ValidationError(f"malformed nav environment block in task {name}: {err}") from err


def _lock_task(name: str, env: Dict[str, Any]) -> LockTask:
    try:
        directions = env.get("directions", {})
        return LockTask(
            controllable=tuple(_dial(d) for d in env["controllable"]),
            directions=tuple(int(directions.get(d, 1)) for d in DIAL_NAMES),
            random_dials=tuple(_dial(d) for d in env.get("random", [])),
            reward_combo={_dial(d): int(v) for d, v in env["reward"].items()},
            start={_dial(d): int(v) for d, v in env.get("start", {}).items()},
            modulus=int(env.get("modulus", 6)),
            name=name,
        )
    except (KeyError, TypeError, AttributeError) as err:
        raise ValidationError(f"malformed lock environment block in task {name}: {err}") from err


def validate_task(spec: TaskSpec) -> Union[NavTask, LockTask]:
    if spec.family == "nav":
        task = _nav_task(spec.name, spec.environment)
    else:
        task = _lock_task(spec.name, spec.environment)
    D = spec.features.state_dim
    if spec.features.dims is not None and len(spec.features.dims) != D:
        raise ValidationError(f"task {spec.name}: features.dims length differs from lo/hi")
    n_coords = 2 if spec.family == "nav" else task.n_dials
    if spec.features.dims is None and D != n_coords:
        raise ValidationError(f"task {spec.name}: features cover {D} of {n_coords} coordinates")
    return task


def builtin_task(name: str) -> TaskSpec:
    if name not in BUILTIN_TASKS:
        raise UnknownTaskError(f"unknown task {name!r}; builtin tasks are {', '.join(BUILTIN_TASKS)}")
    return TaskSpec.from_dict(loadfn(str(TASK_DIR / f"{name}.json")))


def load_task(name_or_path: Union[str, os.PathLike]) -> TaskSpec:
    """Builtin task by name, or a TaskSpec document on disk."""
    if str(name_or_path) in BUILTIN_TASKS:
        return builtin_task(str(name_or_path))
    path = Path(name_or_path)
    if not path.is_file():
        raise UnknownTaskError(f"{name_or_path!s} is neither a builtin task nor a task file")
    try:
        document = loadfn(str(path))
    except ValueError as err:
        raise ValidationError(f"cannot parse task file {path}: {err}") from err
    if not isinstance(document, dict):
        raise ValidationError(f"task file {path} does not hold a JSON object")
    return TaskSpec.from_dict(document)


def save_task(spec: TaskSpec, path: Union[str, os.PathLike]):
    dumpfn(spec.to_dict(), str(path), indent=2)
