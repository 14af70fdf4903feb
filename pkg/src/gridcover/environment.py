"""Grid coverage MDP: reset, safety controller, field of view, rewards."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .gridmap import MapError, MapGrid


class Action(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    LAND = 4


N_ACTIONS = len(Action)

MOVES = {
    Action.NORTH: (-1, 0),
    Action.EAST: (0, 1),
    Action.SOUTH: (1, 0),
    Action.WEST: (0, -1),
}


@dataclass(frozen=True)
class RewardParams:
    r_cov: float = 1.0
    r_sc: float = -1.0
    r_mov: float = -0.2
    r_crash: float = -10.0

    def __post_init__(self):
        if not self.r_cov > 0:
            raise ValueError("r_cov must be positive")
        for name in ("r_sc", "r_mov", "r_crash"):
            if not getattr(self, name) < 0:
                raise ValueError(f"{name} must be negative")


@dataclass(frozen=True, eq=False)
class EnvState:
    map: MapGrid
    coverage: np.ndarray
    position: tuple[int, int]
    budget: int
    safety_flag: bool = False
    landed: bool = False
    terminal: bool = False

    @property
    def n_covered_targets(self) -> int:
        return int((self.coverage & self.map.target).sum())

    def coverage_ratio(self) -> float:
        """Covered target cells over all target cells (1.0 on a map without targets)."""
        total = self.map.n_targets()
        return self.n_covered_targets / total if total else 1.0


@dataclass(frozen=True)
class Observation:
    spatial: np.ndarray  # (N, N, 5) float32
    budget_scalar: float


@dataclass(frozen=True)
class Experience:
    s: Observation
    a: int
    r: float
    s_next: Observation
    terminal: bool


@dataclass(frozen=True)
class StepInfo:
    accepted: bool
    new_targets: int


class EnvError(RuntimeError):
    pass


def fov_cells(position, n: int) -> list[tuple[int, int]]:
    """3x3 camera footprint centred on ``position``, clipped to the grid."""
    r, c = position
    return [
        (i, j)
        for i in range(max(r - 1, 0), min(r + 2, n))
        for j in range(max(c - 1, 0), min(c + 2, n))
    ]


def _mark_fov(coverage: np.ndarray, position) -> np.ndarray:
    r, c = position
    n = coverage.shape[0]
    coverage[max(r - 1, 0):min(r + 2, n), max(c - 1, 0):min(c + 2, n)] = True
    return coverage


def reset(grid: MapGrid, budget_range: tuple[int, int], rng: np.random.Generator,
          start=None, budget: int | None = None) -> EnvState:
    """Start an episode: uniform start cell and uniform budget from the closed interval.

    ``start`` / ``budget`` pin those values instead of sampling (greedy evaluation);
    the rng is then not consumed for the pinned quantity.
    """
    lo, hi = budget_range
    if lo > hi or lo < 1:
        raise ValueError(f"invalid budget range {budget_range}")
    starts = grid.start_cells()
    if not starts:
        raise MapError("map has no start/landing cell")
    if start is None:
        start = starts[int(rng.integers(len(starts)))]
    else:
        start = (int(start[0]), int(start[1]))
        if not (grid.in_bounds(start) and grid.is_landing(start)):
            raise EnvError(f"start cell {start} is not in the start/landing zone")
    if budget is None:
        budget = int(rng.integers(lo, hi + 1))
    elif budget < 1:
        raise EnvError("budget must be at least 1")
    coverage = _mark_fov(np.zeros((grid.size, grid.size), dtype=bool), start)
    return EnvState(map=grid, coverage=coverage, position=start, budget=int(budget))


def start_state(grid: MapGrid, start, budget: int) -> EnvState:
    return reset(grid, (1, max(budget, 1)), None, start=start, budget=budget)


def step(state: EnvState, action, rewards: RewardParams = RewardParams()):
    """Advance one action. Returns ``(next_state, reward, terminal, info)``.

    The input state is not modified.
    """
    if state.terminal or state.landed or state.budget <= 0:
        raise EnvError("step called on a terminal state")
    action = Action(int(action))
    grid = state.map
    reward = rewards.r_mov
    position = state.position
    coverage = state.coverage
    landed = False
    new_targets = 0

    if action == Action.LAND:
        accepted = grid.is_landing(position)
        landed = accepted
    else:
        dr, dc = MOVES[action]
        dest = (position[0] + dr, position[1] + dc)
        accepted = grid.in_bounds(dest) and not grid.is_no_fly(dest)
        if accepted:
            position = dest
            before = coverage
            coverage = _mark_fov(coverage.copy(), position)
            new_targets = int((coverage & ~before & grid.target).sum())
            reward += rewards.r_cov * new_targets

    if not accepted:
        reward += rewards.r_sc

    budget = state.budget - 1
    terminal = landed
    if budget == 0 and not landed:
        terminal = True
        reward += rewards.r_crash

    nxt = replace(state, coverage=coverage, position=position, budget=budget,
                  safety_flag=not accepted, landed=landed, terminal=terminal)
    return nxt, float(reward), terminal, StepInfo(accepted, new_targets)


def encode_observation(state: EnvState, budget_norm: float) -> Observation:
    n = state.map.size
    spatial = np.empty((n, n, 5), dtype=np.float32)
    spatial[..., 0] = state.map.start_land
    spatial[..., 1] = state.map.target
    spatial[..., 2] = state.map.no_fly
    spatial[..., 3] = state.coverage
    spatial[..., 4] = 0.0
    spatial[state.position[0], state.position[1], 4] = 1.0
    return Observation(spatial, float(state.budget) / float(budget_norm))

