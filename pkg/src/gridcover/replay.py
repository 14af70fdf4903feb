"""Fixed-capacity FIFO replay memory with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Experience, Observation


@dataclass
class Batch:
    spatial: np.ndarray
    budget: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_spatial: np.ndarray
    next_budget: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    """Ring buffer of experiences; the oldest entry is overwritten once full.

    Storage is allocated lazily on the first push, when the observation shape
    is known.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.count = 0
        self._next = 0
        self._arrays = None

    def __len__(self):
        return self.count

    def _allocate(self, shape):
        cap = self.capacity
        self._arrays = {
            # observation channels are 0/1 valued
            "spatial": np.zeros((cap,) + shape, dtype=np.uint8),
            "budget": np.zeros(cap, dtype=np.float32),
            "actions": np.zeros(cap, dtype=np.int64),
            "rewards": np.zeros(cap, dtype=np.float32),
            "next_spatial": np.zeros((cap,) + shape, dtype=np.uint8),
            "next_budget": np.zeros(cap, dtype=np.float32),
            "terminal": np.zeros(cap, dtype=bool),
        }

    def push(self, exp: Experience) -> None:
        if self._arrays is None:
            self._allocate(exp.s.spatial.shape)
        i = self._next
        a = self._arrays
        a["spatial"][i] = exp.s.spatial
        a["budget"][i] = exp.s.budget_scalar
        a["actions"][i] = int(exp.a)
        a["rewards"][i] = exp.r
        a["next_spatial"][i] = exp.s_next.spatial
        a["next_budget"][i] = exp.s_next.budget_scalar
        a["terminal"][i] = exp.terminal
        self._next = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def _slot(self, age: int) -> int:
        """Storage slot of the entry ``age`` pushes old among those retained (0 = oldest)."""
        start = (self._next - self.count) % self.capacity
        return (start + age) % self.capacity

    def sample_indices(self, m: int, rng: np.random.Generator) -> np.ndarray:
        if m > self.count:
            raise ValueError(f"cannot sample {m} experiences from a buffer holding {self.count}")
        if m == 0:
            return np.zeros(0, dtype=np.int64)
        # retained entries are exactly the first `count` slots until the ring wraps,
        # and all slots afterwards
        return rng.integers(0, self.count, size=m)

    def get(self, slot: int) -> Experience:
        a = self._arrays
        return Experience(
            s=Observation(a["spatial"][slot].astype(np.float32), float(a["budget"][slot])),
            a=int(a["actions"][slot]),
            r=float(a["rewards"][slot]),
            s_next=Observation(a["next_spatial"][slot].astype(np.float32), float(a["next_budget"][slot])),
            terminal=bool(a["terminal"][slot]),
        )

    def contents(self) -> list[Experience]:
        """Retained experiences from oldest to newest."""
        return [self.get(self._slot(k)) for k in range(self.count)]

    def sample(self, m: int, rng: np.random.Generator) -> list[Experience]:
        return [self.get(int(i)) for i in self.sample_indices(m, rng)]

    def sample_batch(self, m: int, rng: np.random.Generator) -> Batch:
        """Same draw as :meth:`sample`, returned as stacked float32 arrays."""
        idx = self.sample_indices(m, rng)
        a = self._arrays
        return Batch(
            spatial=a["spatial"][idx].astype(np.float32),
            budget=a["budget"][idx],
            actions=a["actions"][idx],
            rewards=a["rewards"][idx],
            next_spatial=a["next_spatial"][idx].astype(np.float32),
            next_budget=a["next_budget"][idx],
            terminal=a["terminal"][idx],
        )


def batch_from_experiences(exps: list[Experience]) -> Batch:
    return Batch(
        spatial=np.stack([e.s.spatial for e in exps]).astype(np.float32),
        budget=np.array([e.s.budget_scalar for e in exps], dtype=np.float32),
        actions=np.array([int(e.a) for e in exps], dtype=np.int64),
        rewards=np.array([e.r for e in exps], dtype=np.float32),
        next_spatial=np.stack([e.s_next.spatial for e in exps]).astype(np.float32),
        next_budget=np.array([e.s_next.budget_scalar for e in exps], dtype=np.float32),
        terminal=np.array([e.terminal for e in exps], dtype=bool),
    )
