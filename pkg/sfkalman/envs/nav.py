"""
Continuous 2-D navigation with rectangular barriers and a disc-shaped goal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from sfkalman.errors import ValidationError

ACTIONS = ("left", "right", "up", "down")
DIRECTIONS = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
MAX_START_TRIES = 10_000


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 <= self.x1 and self.y0 <= self.y1):
            raise ValidationError(f"degenerate barrier {self}")

    def contains(self, p) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def intersects_segment(self, p, q) -> bool:
        # Liang-Barsky clipping against the closed rectangle
        t0, t1 = 0.0, 1.0
        for start, delta, lo, hi in (
            (p[0], q[0] - p[0], self.x0, self.x1),
            (p[1], q[1] - p[1], self.y0, self.y1),
        ):
            if delta == 0:
                if start < lo or start > hi:
                    return False
                continue
            ta, tb = (lo - start) / delta, (hi - start) / delta
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
            if t0 > t1:
                return False
        return True


@dataclass(frozen=True)
class NavTask:
    barriers: Tuple[Rect, ...]
    goal_center: Tuple[float, float]
    goal_radius: float = 0.1
    step_size: float = 0.05
    slip_prob: float = 0.05
    lo: Tuple[float, float] = (0.0, 0.0)
    hi: Tuple[float, float] = (1.0, 1.0)
    name: str = "nav"

    def __post_init__(self):
        object.__setattr__(self, "barriers", tuple(self.barriers))
        object.__setattr__(self, "goal_center", tuple(float(c) for c in self.goal_center))
        if not 0 <= self.slip_prob <= 1:
            raise ValidationError(f"slip probability {self.slip_prob} outside [0, 1]")
        if not self.step_size > 0:
            raise ValidationError(f"step size must be positive, got {self.step_size}")
        if not self.goal_radius > 0:
            raise ValidationError(f"goal radius must be positive, got {self.goal_radius}")
        if not self.in_bounds(self.goal_center):
            raise ValidationError(f"goal {self.goal_center} lies outside the arena")
        for rect in self.barriers:
            if not (self.in_bounds((rect.x0, rect.y0)) and self.in_bounds((rect.x1, rect.y1))):
                raise ValidationError(f"barrier {rect} extends outside the arena")

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    def in_bounds(self, p) -> bool:
        return all(lo <= x <= hi for x, lo, hi in zip(p, self.lo, self.hi))

    def is_free(self, p) -> bool:
        return self.in_bounds(p) and not any(rect.contains(p) for rect in self.barriers)

    def in_goal(self, p) -> bool:
        return float(np.hypot(p[0] - self.goal_center[0], p[1] - self.goal_center[1])) <= self.goal_radius

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform start over the free, non-goal part of the arena."""
        for _ in range(MAX_START_TRIES):
            s = rng.uniform(self.lo, self.hi)
            if self.is_free(s) and not self.in_goal(s):
                return s
        raise ValidationError(f"could not sample a free start state for task {self.name}")

    def step(self, s, a: int, rng: np.random.Generator):
        return nav_step(self, s, a, rng)


def nav_step(task: NavTask, s: Sequence[float], a: int, rng: np.random.Generator):
    """
    :param task: navigation task
    :param s: current position
    :param a: index into ACTIONS
    :param rng: random generator; exactly one uniform draw per call
    :return: (s', r, done)
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (2,) or not task.is_free(s):
        raise ValidationError(f"invalid navigation state {s}")
    if not 0 <= a < len(ACTIONS):
        raise ValidationError(f"invalid navigation action {a}")
    slipped = rng.random() < task.slip_prob
    s_next = s.copy()
    if not slipped:
        target = np.clip(s + task.step_size * DIRECTIONS[a], task.lo, task.hi)
        if not any(rect.intersects_segment(s, target) for rect in task.barriers):
            s_next = target
    done = task.in_goal(s_next)
    return s_next, float(done), done
