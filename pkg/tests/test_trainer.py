import numpy as np
import pytest

from gridcover.environment import Action, RewardParams
from gridcover.gridmap import builtin_map, parse_map, serialize_map
from gridcover.nn import NetworkArch, QNetwork, save_checkpoint, soft_update
from gridcover.trainer import (
    ConfigError,
    TrainConfig,
    TrainingDiverged,
    canonical_eval_point,
    evaluate_greedy,
    parse_config_text,
    train,
)

from oracles import replay_episode

TINY = dict(conv_layers=((4, 3),), dense_layers=(16,), batch_size=8, replay_capacity=500,
            budget_min=4, budget_max=8, eval_every=5)


def tiny_config(**kw):
    return TrainConfig(**{**TINY, **kw})


def land_net(size, q=(0, 0, 0, 0, 1)):
    arch = NetworkArch(size=size, conv_layers=((2, 3),), dense_layers=(4,))
    net = QNetwork(arch, dtype=np.float64)
    net.params["dense1.b"][:] = q
    return net


def test_defaults_match_reference_table():
    cfg = TrainConfig()
    assert (cfg.replay_capacity, cfg.n_episodes, cfg.beta, cfg.batch_size, cfg.gamma, cfg.tau) == \
        (50_000, 10_000, 0.1, 128, 0.95, 0.005)
    assert cfg.budget_range == (25, 75)
    assert cfg.effective_warmup == 128
    assert cfg.effective_budget_norm == 75.0


@pytest.mark.parametrize("kw", [
    dict(gamma=1.2), dict(tau=-0.1), dict(batch_size=0), dict(beta=0.0),
    dict(budget_min=5, budget_max=4), dict(r_cov=-1.0), dict(r_crash=1.0),
    dict(warmup=10, batch_size=32),
])
def test_invalid_config_rejected(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_config_text_round_trip():
    cfg = TrainConfig(map_path="maps/smoke6.map", budget_min=10, budget_max=20, lr=3e-4,
                      conv_layers=((8, 3), (8, 3)), dense_layers=(64,), warmup=256)
    assert TrainConfig.from_text(cfg.to_text()) == cfg


def test_config_text_parsing_and_overrides():
    text = "# desk\nbudget_range = 10:20\nn_episodes = 300  # short\nconv_layers = 16x5, 16x3\n"
    assert parse_config_text(text) == {"budget_min": 10, "budget_max": 20, "n_episodes": 300,
                                       "conv_layers": ((16, 5), (16, 3))}
    cfg = TrainConfig.from_text(text, seed=7, n_episodes=None)
    assert cfg.seed == 7 and cfg.n_episodes == 300
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("unknown_key = 3")
    with pytest.raises(ConfigError, match="gamma"):
        parse_config_text("gamma = fast")


def test_zero_episodes_returns_initial_network():
    cfg = tiny_config(n_episodes=0, seed=3)
    net, log = train(cfg, builtin_map("smoke6"))
    fresh = QNetwork.initialize(cfg.arch(6), np.random.default_rng(3))
    assert log.episodes == [] and log.evals == []
    assert all(np.array_equal(fresh.params[k], v) for k, v in net.params.items())


def test_training_is_reproducible(tmp_path):
    grid = builtin_map("smoke6")
    outs = []
    for run in ("a", "b"):
        net, log = train(tiny_config(n_episodes=20, seed=11), grid)
        d = tmp_path / run
        d.mkdir()
        log.write_csv(d / "episodes.csv", d / "evals.csv")
        save_checkpoint(net, d / "ckpt")
        outs.append([(d / f).read_bytes() for f in ("episodes.csv", "evals.csv", "ckpt")])
    assert outs[0] == outs[1]
    other, _ = train(tiny_config(n_episodes=20, seed=12), grid)
    assert not np.array_equal(other.params["conv0.w"], net.params["conv0.w"])


def test_log_shape_and_step_bound():
    cfg = tiny_config(n_episodes=30, seed=0)
    _, log = train(cfg, builtin_map("corridor"))
    assert [e.episode for e in log.episodes] == list(range(30))
    assert [e.episode for e in log.evals] == [5, 10, 15, 20, 25, 30]
    for e in log.episodes:
        assert 1 <= e.steps <= cfg.budget_max
        assert 0.0 <= e.coverage_ratio <= 1.0
        if not e.landed:
            # an unlanded episode always runs its whole budget
            assert cfg.budget_min <= e.steps


def test_one_update_per_step_after_warmup(monkeypatch):
    import gridcover.trainer as trainer_mod

    calls = {"train": 0, "soft": 0}
    real_train, real_soft = trainer_mod.train_batch, trainer_mod.soft_update

    def counting_train(*a, **k):
        calls["train"] += 1
        return real_train(*a, **k)

    def counting_soft(*a, **k):
        calls["soft"] += 1
        return real_soft(*a, **k)

    monkeypatch.setattr(trainer_mod, "train_batch", counting_train)
    monkeypatch.setattr(trainer_mod, "soft_update", counting_soft)
    cfg = tiny_config(n_episodes=10, seed=2, warmup=20)
    _, log = train(cfg, builtin_map("smoke6"))
    total_steps = sum(e.steps for e in log.episodes)
    assert calls["train"] == calls["soft"] == total_steps - cfg.warmup + 1


def test_target_drift_bound():
    rng = np.random.default_rng(0)
    arch = NetworkArch(size=5, conv_layers=((3, 3),), dense_layers=(8,))
    for _ in range(20):
        online = QNetwork.initialize(arch, rng)
        target = QNetwork.initialize(arch, rng)
        before = {k: v.copy() for k, v in target.params.items()}
        soft_update(target, online, 0.005)
        drift = max(np.max(np.abs(target.params[k] - before[k])) for k in before)
        gap = max(np.max(np.abs(online.params[k] - before[k])) for k in before)
        assert drift <= 0.005 * gap * (1 + 1e-5)


def test_divergence_guard():
    cfg = tiny_config(n_episodes=50, seed=0, loss_limit=1e-12)
    with pytest.raises(TrainingDiverged, match="exceeded"):
        train(cfg, builtin_map("smoke6"))


def test_greedy_land_immediately():
    grid = builtin_map("smoke6")
    roll = evaluate_greedy(land_net(6), grid, (0, 0), 1)
    assert roll.landed and roll.steps == 1 and roll.trajectory == [((0, 0), Action.LAND, True)]
    assert roll.ret == pytest.approx(-0.2)


def test_greedy_rejects_zero_budget():
    with pytest.raises(ValueError):
        evaluate_greedy(land_net(6), builtin_map("smoke6"), (0, 0), 0)


def test_greedy_rollout_deterministic_and_matches_replay():
    grid = builtin_map("corridor")
    rows = serialize_map(grid).split()
    rng = np.random.default_rng(5)
    arch = NetworkArch(size=6, conv_layers=((4, 3),), dense_layers=(16,))
    for _ in range(10):
        net = QNetwork.initialize(arch, rng)
        for start in grid.start_cells():
            budget = int(rng.integers(1, 25))
            a = evaluate_greedy(net, grid, start, budget)
            b = evaluate_greedy(net, grid, start, budget)
            assert a.trajectory == b.trajectory and a.ret == b.ret
            actions = [int(act) for _, act, _ in a.trajectory]
            ret, _, positions, landed, covered = replay_episode(rows, start, budget, actions)
            assert ret == pytest.approx(a.ret, abs=1e-9)
            assert landed == a.landed
            assert [p for p, _, _ in a.trajectory] == positions[:-1]
            n_targets = sum(ch in "TYM" for row in rows for ch in row)
            n_hit = sum(rows[r][c] in "TYM" for r, c in covered)
            assert a.coverage_ratio == n_hit / n_targets


def test_canonical_eval_point():
    grid = parse_map("..L\n.L.\nT..\n")
    assert canonical_eval_point(grid, (10, 21)) == ((0, 2), 15)


def test_reward_params_reach_environment():
    grid = builtin_map("smoke6")
    roll = evaluate_greedy(land_net(6, q=(1, 0, 0, 0, 0)), grid, (0, 0), 3,
                           RewardParams(r_sc=-2.0, r_mov=-0.5, r_crash=-7.0))
    # north from row 0 is rejected every step, then the budget runs out
    assert not roll.landed
    assert roll.ret == pytest.approx(3 * (-2.5) - 7.0)
