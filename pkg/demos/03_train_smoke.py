"""
Training on the 6x6 smoke map
=============================

Runs the desk configuration (about four minutes on one core), then sweeps
every start cell and budget with the greedy policy.  Pass a smaller episode
count as the first argument for a quick look, e.g. ``python 03_train_smoke.py 200``.
"""
import sys
from pathlib import Path

import gridcover
from gridcover import TrainConfig, builtin_map, landing_ratio_sweep, save_checkpoint, train

cfg_path = Path(gridcover.__file__).parent / "configs" / "desk.cfg"
overrides = {"n_episodes": int(sys.argv[1])} if len(sys.argv) > 1 else {}
config = TrainConfig.from_file(cfg_path, seed=0, **overrides)
grid = builtin_map("smoke6")


def progress(rec):
    if (rec.episode + 1) % 100 == 0:
        print(f"episode {rec.episode + 1}: return {rec.ret:6.2f}, landed {rec.landed}, "
              f"coverage {rec.coverage_ratio:.2f}")


net, log = train(config, grid, progress=progress)
print("greedy eval returns:", [round(e.greedy_return, 1) for e in log.evals])

sweep = landing_ratio_sweep(net, grid, config.budget_range, config.rewards, config.effective_budget_norm)
print(f"landing ratio {sweep.ratio:.3f}, mean coverage {sweep.mean_coverage:.3f} "
      f"over {len(sweep.cases)} (start, budget) pairs")

save_checkpoint(net, "smoke6.ckpt")
log.write_csv("smoke6_episodes.csv", "smoke6_evals.csv")
