"""
Coverage against budget, and a trajectory picture
==================================================

Uses the checkpoint written by ``03_train_smoke.py``.
"""
from gridcover import builtin_map, coverage_curve, evaluate_greedy, load_checkpoint
from gridcover.evaluation import curve_trend, render_rollout

grid = builtin_map("smoke6")
net = load_checkpoint("smoke6.ckpt", expected_size=grid.size)
norm = net.meta.get("budget_norm")

# a larger budget should never hurt coverage much, though the agent may land early
curve = coverage_curve(net, grid, (0, 0), (6, 20), budget_norm=norm)
for budget, ratio in curve:
    print(f"budget {budget:2d}: {'#' * round(ratio * 40):40s} {ratio:.2f}")
print("fraction of non-decreasing steps:", round(curve_trend(curve), 2))

rollout = evaluate_greedy(net, grid, (0, 0), 16, budget_norm=norm)
for pos, action, accepted in rollout.trajectory:
    print(pos, action.name, "" if accepted else "rejected")
render_rollout(grid, rollout, "smoke6_trajectory.svg")
print("wrote smoke6_trajectory.svg")
