"""Episode loop for DDQN training plus greedy evaluation rollouts."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .agent import AgentParams, argmax_first, sample_softmax, train_batch
from .environment import Action, Experience, RewardParams, encode_observation, reset, start_state, step
from .gridmap import MapGrid, load_map
from .nn import Adam, NetworkArch, QNetwork, soft_update
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Training hyperparameters. Defaults are the full-scale settings for 10x10 maps."""

    map_path: str | None = None
    n_episodes: int = 10_000
    budget_min: int = 25
    budget_max: int = 75
    replay_capacity: int = 50_000
    batch_size: int = 128
    gamma: float = 0.95
    tau: float = 0.005
    beta: float = 0.1
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    r_cov: float = 1.0
    r_sc: float = -1.0
    r_mov: float = -0.2
    r_crash: float = -10.0
    seed: int = 0
    eval_every: int = 50
    warmup: int | None = None  # defaults to batch_size
    budget_norm: float | None = None  # defaults to budget_max
    conv_layers: tuple = ((16, 5), (16, 3), (16, 3))
    dense_layers: tuple = (256, 256)
    loss_limit: float = 1e6

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("budget_min", "replay_capacity", "batch_size", "lr"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_episodes < 0 or self.eval_every < 0:
            raise ConfigError("n_episodes and eval_every must be non-negative")
        if self.budget_max < self.budget_min:
            raise ConfigError("budget_max must be >= budget_min")
        for name in ("gamma", "tau"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.warmup is not None and self.warmup < self.batch_size:
            raise ConfigError("warmup must be at least batch_size")
        try:
            self.rewards
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def budget_range(self) -> tuple[int, int]:
        return (self.budget_min, self.budget_max)

    @property
    def effective_warmup(self) -> int:
        return self.batch_size if self.warmup is None else self.warmup

    @property
    def effective_budget_norm(self) -> float:
        return float(self.budget_max if self.budget_norm is None else self.budget_norm)

    @property
    def rewards(self) -> RewardParams:
        return RewardParams(self.r_cov, self.r_sc, self.r_mov, self.r_crash)

    @property
    def agent(self) -> AgentParams:
        return AgentParams(self.gamma, self.beta)

    def arch(self, size: int) -> NetworkArch:
        return NetworkArch(size=size, conv_layers=self.conv_layers, dense_layers=self.dense_layers)

    # -- flat ``key = value`` text form

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "conv_layers":
                v = ",".join(f"{a}x{b}" for a, b in v)
            elif f.name == "dense_layers":
                v = ",".join(str(w) for w in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "TrainConfig":
        values = parse_config_text(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), **overrides)


_FIELD_TYPES = {
    "map_path": str, "n_episodes": int, "budget_min": int, "budget_max": int,
    "replay_capacity": int, "batch_size": int, "gamma": float, "tau": float, "beta": float,
    "lr": float, "adam_beta1": float, "adam_beta2": float, "adam_eps": float,
    "r_cov": float, "r_sc": float, "r_mov": float, "r_crash": float, "seed": int,
    "eval_every": int, "warmup": int, "budget_norm": float, "loss_limit": float,
}


def _parse_value(key: str, raw: str):
    if key == "conv_layers":
        out = []
        for item in raw.split(","):
            filters, _, k = item.strip().partition("x")
            out.append((int(filters), int(k)))
        return tuple(out)
    if key == "dense_layers":
        return tuple(int(w) for w in raw.split(",") if w.strip())
    if key == "budget_range":
        lo, _, hi = raw.partition(":")
        return int(lo), int(hi or lo)
    return _FIELD_TYPES[key](raw)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or (key not in _FIELD_TYPES and key not in ("conv_layers", "dense_layers", "budget_range")):
            raise ConfigError(f"config line {lineno}: cannot parse {line!r}")
        try:
            value = _parse_value(key, raw)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {raw!r}") from None
        if key == "budget_range":
            values["budget_min"], values["budget_max"] = value
        else:
            values[key] = value
    return values


# ---------------------------------------------------------------- logging

@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    ret: float
    steps: int
    landed: bool
    coverage_ratio: float


@dataclass(frozen=True)
class EvalRecord:
    episode: int
    greedy_return: float


@dataclass
class TrainLog:
    episodes: list = field(default_factory=list)
    evals: list = field(default_factory=list)

    def write_csv(self, episodes_path, evals_path) -> None:
        with open(episodes_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "return", "steps", "landed", "coverage_ratio"])
            for e in self.episodes:
                w.writerow([e.episode, f"{e.ret:.6f}", e.steps, int(e.landed), f"{e.coverage_ratio:.6f}"])
        with open(evals_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "greedy_return"])
            for e in self.evals:
                w.writerow([e.episode, f"{e.greedy_return:.6f}"])


# ---------------------------------------------------------------- rollouts

@dataclass
class Rollout:
    ret: float
    trajectory: list  # (position, Action, accepted) per step, position before the action
    landed: bool
    coverage_ratio: float
    coverage: np.ndarray
    budget: int

    @property
    def steps(self) -> int:
        return len(self.trajectory)


def evaluate_greedy(net: QNetwork, grid: MapGrid, start, budget: int,
                    rewards: RewardParams = RewardParams(), budget_norm: float | None = None) -> Rollout:
    """Deterministic rollout under the greedy policy from a fixed start and budget."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    norm = float(budget if budget_norm is None else budget_norm)
    state = start_state(grid, start, budget)
    total = 0.0
    trajectory = []
    while not state.terminal:
        obs = encode_observation(state, norm)
        a = Action(int(argmax_first(net.q_values(obs))))
        pos = state.position
        state, r, _, info = step(state, a, rewards)
        trajectory.append((pos, a, info.accepted))
        total += r
    return Rollout(total, trajectory, state.landed, state.coverage_ratio(), state.coverage.copy(), budget)


def canonical_eval_point(grid: MapGrid, budget_range) -> tuple[tuple[int, int], int]:
    lo, hi = budget_range
    return grid.start_cells()[0], (lo + hi) // 2


# ---------------------------------------------------------------- training

def train(config: TrainConfig, grid: MapGrid | None = None,
          progress: Callable[[EpisodeRecord], None] | None = None) -> tuple[QNetwork, TrainLog]:
    """Run DDQN training; returns the online network and the episode/eval log.

    All randomness comes from one generator seeded with ``config.seed`` and is
    consumed in a fixed order (initialisation, then per step: reset, policy, replay).
    """
    if grid is None:
        if config.map_path is None:
            raise ConfigError("no map given")
        grid = load_map(config.map_path)
    rng = np.random.default_rng(config.seed)
    arch = config.arch(grid.size)
    net = QNetwork.initialize(arch, rng)
    net.meta["budget_norm"] = config.effective_budget_norm
    target = net.copy()
    buffer = ReplayBuffer(config.replay_capacity)
    optimizer = Adam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rewards = config.rewards
    norm = config.effective_budget_norm
    warmup = config.effective_warmup
    eval_start, eval_budget = canonical_eval_point(grid, config.budget_range)
    train_log = TrainLog()

    for episode in range(config.n_episodes):
        state = reset(grid, config.budget_range, rng)
        obs = encode_observation(state, norm)
        ret = 0.0
        steps = 0
        while not state.terminal:
            a = sample_softmax(net.q_values(obs), config.beta, rng)
            state, r, terminal, _ = step(state, a, rewards)
            next_obs = encode_observation(state, norm)
            buffer.push(Experience(obs, a, r, next_obs, terminal))
            ret += r
            steps += 1
            obs = next_obs
            if len(buffer) >= warmup:
                batch = buffer.sample_batch(config.batch_size, rng)
                loss = train_batch(net, target, batch, config.gamma, optimizer)
                if not np.isfinite(loss) or loss > config.loss_limit:
                    raise TrainingDiverged(
                        f"loss {loss:.4g} exceeded limit {config.loss_limit:g} in episode {episode}")
                soft_update(target, net, config.tau)

        record = EpisodeRecord(episode, ret, steps, state.landed, state.coverage_ratio())
        train_log.episodes.append(record)
        if progress is not None:
            progress(record)
        if config.eval_every and (episode + 1) % config.eval_every == 0:
            roll = evaluate_greedy(net, grid, eval_start, eval_budget, rewards, norm)
            train_log.evals.append(EvalRecord(episode + 1, roll.ret))
            log.debug("episode %d greedy return %.3f", episode + 1, roll.ret)
    return net, train_log
