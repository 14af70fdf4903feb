"""Double-DQN decision logic: policies, targets and the per-batch update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Action
from .nn import Adam, NonFiniteError, QNetwork
from .replay import Batch


@dataclass(frozen=True)
class AgentParams:
    gamma: float = 0.95
    beta: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def argmax_first(q: np.ndarray) -> np.ndarray | int:
    """Argmax along the last axis; ties go to the lowest index."""
    q = np.asarray(q)
    if not np.all(np.isfinite(q)):
        raise NonFiniteError("non-finite Q-values")
    return np.argmax(q, axis=-1)  # np.argmax returns the first maximum


def greedy_action(net: QNetwork, obs) -> Action:
    return Action(int(argmax_first(net.q_values(obs))))


def softmax_probs(q, beta: float) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if not beta > 0:
        raise ValueError("beta must be positive")
    z = (q - q.max(axis=-1, keepdims=True)) / beta
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("non-finite soft-max probabilities")
    return p


def sample_softmax(q, beta: float, rng: np.random.Generator) -> int:
    """Draw an action index with probability proportional to exp(q / beta).

    Inverse-CDF sampling with one uniform draw per call.
    """
    p = softmax_probs(q, beta)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(p) - 1))


def softmax_policy(net: QNetwork, obs, beta: float, rng: np.random.Generator) -> Action:
    return Action(sample_softmax(net.q_values(obs), beta, rng))


def ddqn_targets(batch: Batch, online: QNetwork, target: QNetwork, gamma: float) -> np.ndarray:
    """r for terminal samples, else r + gamma * Q_target(s', argmax_a' Q_online(s', a'))."""
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    if len(rewards) == 0:
        raise ValueError("empty batch")
    q_next_online = online.forward(batch.next_spatial, batch.next_budget)
    q_next_target = target.forward(batch.next_spatial, batch.next_budget)
    best = argmax_first(q_next_online)
    bootstrap = q_next_target[np.arange(len(best)), best].astype(np.float64)
    return np.where(batch.terminal, rewards, rewards + gamma * bootstrap)


def train_batch(online: QNetwork, target: QNetwork, batch: Batch, gamma: float, optimizer: Adam) -> float:
    """One gradient step on the batch-mean squared DDQN error. Returns the pre-update loss."""
    y = ddqn_targets(batch, online, target, gamma)
    loss, grads = online.loss_and_grads(batch.spatial, batch.budget, batch.actions, y)
    optimizer.step(online.params, grads)
    return loss
