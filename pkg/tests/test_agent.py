import math

import numpy as np
import pytest
from scipy import stats

from gridcover.agent import (
    AgentParams,
    argmax_first,
    ddqn_targets,
    greedy_action,
    sample_softmax,
    softmax_policy,
    softmax_probs,
    train_batch,
)
from gridcover.environment import Action, Observation
from gridcover.nn import Adam, NetworkArch, NonFiniteError, QNetwork
from gridcover.replay import Batch

ARCH = NetworkArch(size=3, conv_layers=((2, 3),), dense_layers=(4,))


def constant_net(q):
    """Network whose output ignores the input and equals ``q``."""
    net = QNetwork(ARCH, dtype=np.float64)
    net.params["dense1.b"][:] = q
    return net


def obs():
    return Observation(np.zeros((3, 3, 5), dtype=np.float32), 0.5)


def batch(rewards, terminal, actions=None):
    m = len(rewards)
    sp = np.zeros((m, 3, 3, 5), dtype=np.float32)
    return Batch(sp, np.zeros(m, np.float32), np.array(actions or [0] * m), np.array(rewards, np.float32),
                 sp.copy(), np.zeros(m, np.float32), np.array(terminal))


def test_agent_params_validation():
    assert AgentParams().gamma == 0.95 and AgentParams().beta == 0.1
    with pytest.raises(ValueError):
        AgentParams(gamma=1.5)
    with pytest.raises(ValueError):
        AgentParams(beta=0.0)


def test_greedy_examples():
    assert greedy_action(constant_net([0, 5, 0, 0, 0]), obs()) == Action.EAST
    assert greedy_action(constant_net([2, 2, 2, 2, 2]), obs()) == Action.NORTH


def test_greedy_invariant_to_affine_rescaling():
    rng = np.random.default_rng(0)
    for _ in range(100):
        q = rng.normal(size=5)
        c, d = rng.uniform(0.1, 10), rng.normal()
        assert argmax_first(q) == argmax_first(c * q + d)


def test_greedy_rejects_nan():
    with pytest.raises(NonFiniteError):
        argmax_first(np.array([0.0, np.nan, 1.0, 0.0, 0.0]))


def test_softmax_uniform_for_equal_q():
    np.testing.assert_allclose(softmax_probs(np.full(5, 3.3), 0.1), 0.2, atol=1e-12)


def test_softmax_closed_form():
    p = softmax_probs([1, 0, 0, 0, 0], 0.1)
    expected = math.exp(10) / (math.exp(10) + 4)
    assert p[0] == pytest.approx(expected, rel=1e-12)
    assert p[0] == pytest.approx(0.99982, abs=5e-6)


def test_softmax_shift_invariant_and_overflow_safe():
    q = np.array([1000.0, 999.0, 998.0, 0.0, -1e4])
    np.testing.assert_allclose(softmax_probs(q, 0.1), softmax_probs(q - 1000.0, 0.1), rtol=1e-12)
    assert softmax_probs(q, 0.1).sum() == pytest.approx(1.0, abs=1e-6)


def test_softmax_empirical_frequencies():
    q = np.array([0.3, 0.1, 0.25, -0.2, 0.0])
    p = softmax_probs(q, 0.1)
    rng = np.random.default_rng(17)
    n = 100_000
    counts = np.bincount([sample_softmax(q, 0.1, rng) for _ in range(n)], minlength=5)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) < 4 * sigma)
    assert stats.chisquare(counts, n * p).pvalue > 1e-4


def test_softmax_low_temperature_is_greedy():
    net = constant_net([0.1, 0.5, 0.2, 0.45, 0.0])
    rng = np.random.default_rng(1)
    picks = [softmax_policy(net, obs(), 1e-3, rng) for _ in range(5000)]
    assert np.mean([a == Action.EAST for a in picks]) > 0.999


def test_ddqn_target_hand_example():
    online = constant_net([1, 2, 0, 0, 0])
    target = constant_net([7, 3, 0, 0, 0])
    y = ddqn_targets(batch([1.0], [False]), online, target, 0.95)
    assert y[0] == pytest.approx(3.85, abs=1e-12)


def test_ddqn_terminal_and_gamma_zero():
    online = constant_net([1, 2, 0, 0, 0])
    target = constant_net([7, 3, 0, 0, 0])
    assert ddqn_targets(batch([-10.0], [True]), online, target, 0.95)[0] == -10.0
    y = ddqn_targets(batch([0.5, -1.0, 2.0], [False, True, False]), online, target, 0.0)
    np.testing.assert_allclose(y, [0.5, -1.0, 2.0], rtol=1e-7)


def test_selection_by_online_evaluation_by_target():
    b = batch([0.0], [False])
    online = constant_net([0, 0, 5, 1, 0])
    # target net changes the magnitude but never which action is chosen
    for tq in ([1, 2, 3, 4, 5], [9, 9, -1, 9, 9]):
        y = ddqn_targets(b, online, constant_net(tq), 1.0)
        assert y[0] == pytest.approx(tq[2])
    # online net changes the selection
    y = ddqn_targets(b, constant_net([0, 0, 1, 5, 0]), constant_net([1, 2, 3, 4, 5]), 1.0)
    assert y[0] == pytest.approx(4)


def test_train_batch_zero_error_is_fixed_point():
    online = constant_net([0.0, 0.0, 0.0, 0.0, 0.0])
    target = online.copy()
    before = {k: v.copy() for k, v in online.params.items()}
    loss = train_batch(online, target, batch([0.0, 0.0], [True, True]), 0.95, Adam(lr=0.1))
    assert loss == 0.0
    assert all(np.array_equal(before[k], v) for k, v in online.params.items())


def test_train_batch_single_sample_loss():
    online = constant_net([0.5, 0.0, 0.0, 0.0, 0.0])
    target = constant_net([0.0, 2.0, 0.0, 0.0, 0.0])
    # y = 1 + 0.9 * Q_target(s', argmax Q_online(s')) = 1 + 0.9 * 0 = 1; Q(s, a=0) = 0.5
    loss = train_batch(online, target, batch([1.0], [False], actions=[0]), 0.9, Adam())
    assert loss == pytest.approx(0.25)


def test_train_batch_loss_matches_recomputation():
    rng = np.random.default_rng(4)
    online = QNetwork.initialize(ARCH, rng, dtype=np.float64)
    target = QNetwork.initialize(ARCH, rng, dtype=np.float64)
    m = 6
    sp = (rng.random((m, 3, 3, 5)) < 0.4).astype(np.float32)
    nsp = (rng.random((m, 3, 3, 5)) < 0.4).astype(np.float32)
    b = Batch(sp, rng.random(m).astype(np.float32), rng.integers(0, 5, m), rng.normal(size=m).astype(np.float32),
              nsp, rng.random(m).astype(np.float32), rng.random(m) < 0.3)
    # independent recomputation from per-sample forward passes
    expected = 0.0
    for i in range(m):
        q = online.forward(sp[i], b.budget[i])[0]
        if b.terminal[i]:
            y = float(b.rewards[i])
        else:
            qn = online.forward(nsp[i], b.next_budget[i])[0]
            qt = target.forward(nsp[i], b.next_budget[i])[0]
            y = float(b.rewards[i]) + 0.95 * qt[int(np.argmax(qn))]
        expected += (q[b.actions[i]] - y) ** 2 / m
    target_before = {k: v.copy() for k, v in target.params.items()}
    loss = train_batch(online, target, b, 0.95, Adam())
    assert loss == pytest.approx(expected, rel=1e-10)
    assert all(np.array_equal(target_before[k], v) for k, v in target.params.items())
