"""
Combination lock with three dials of six digits. Actions rotate one
controllable dial by its direction; broken dials spin at random every step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np

from sfkalman.errors import ValidationError

DIAL_NAMES = ("left", "middle", "right")


@dataclass(frozen=True)
class LockTask:
    controllable: Tuple[int, ...]
    directions: Tuple[int, ...]
    random_dials: Tuple[int, ...]
    reward_combo: Dict[int, int]
    start: Dict[int, int]
    modulus: int = 6
    n_dials: int = 3
    name: str = "lock"

    def __post_init__(self):
        dial_range = range(self.n_dials)
        if not self.controllable:
            raise ValidationError("a lock needs at least one controllable dial")
        if set(self.controllable) & set(self.random_dials):
            raise ValidationError("controllable and random dials overlap")
        if any(d not in dial_range for d in (*self.controllable, *self.random_dials)):
            raise ValidationError(f"dial index outside [0, {self.n_dials})")
        if len(self.directions) != self.n_dials or any(d not in (-1, 1) for d in self.directions):
            raise ValidationError(f"dial directions must be +1 or -1, got {self.directions}")
        if any(d in self.random_dials for d in self.reward_combo):
            raise ValidationError("reward combination references a random dial")
        for name, assignment in (("reward", self.reward_combo), ("start", self.start)):
            for dial, digit in assignment.items():
                if dial not in dial_range or not 0 <= digit < self.modulus:
                    raise ValidationError(f"{name} assignment {dial}:{digit} out of range")

    @property
    def n_actions(self) -> int:
        return len(self.controllable)

    @property
    def n_states(self) -> int:
        return self.modulus**self.n_dials

    def all_states(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(range(self.modulus), repeat=self.n_dials)

    def satisfied(self, s) -> bool:
        return all(int(s[dial]) == digit for dial, digit in self.reward_combo.items())

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        s = rng.integers(0, self.modulus, size=self.n_dials)
        for dial, digit in self.start.items():
            s[dial] = digit
        return s

    def step(self, s, a: int, rng: np.random.Generator):
        if not 0 <= a < self.n_actions:
            raise ValidationError(f"invalid lock action {a}")
        return lock_step(self, s, self.controllable[a], rng)


def lock_step(task: LockTask, s, dial: int, rng: np.random.Generator):
    """
    Rotate ``dial`` by its direction, then respin the random dials.

    :return: (s', r, done)
    """
    if dial not in task.controllable:
        raise ValidationError(f"dial {dial} is not controllable in task {task.name}")
    s_next = np.array(s, dtype=np.int64)
    if s_next.shape != (task.n_dials,) or np.any(s_next < 0) or np.any(s_next >= task.modulus):
        raise ValidationError(f"invalid lock state {s}")
    s_next[dial] = (s_next[dial] + task.directions[dial]) % task.modulus
    if task.random_dials:
        s_next[list(task.random_dials)] = rng.integers(
            0, task.modulus, size=len(task.random_dials)
        )
    done = task.satisfied(s_next)
    return s_next, float(done), done
