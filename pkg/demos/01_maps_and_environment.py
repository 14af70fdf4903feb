"""
Maps, the safety controller and the field of view
==================================================

Load a builtin map, take a few hand-picked actions and watch the budget,
the coverage grid and the rewards change.
"""
import numpy as np

from gridcover import Action, RewardParams, builtin_map, encode_observation, reset, serialize_map, step

grid = builtin_map("smoke6")
print(serialize_map(grid))
print("counts:", grid.counts())

# reset draws the start cell and the budget from one generator
rng = np.random.default_rng(0)
state = reset(grid, (10, 20), rng, start=(1, 1))
print("start", state.position, "budget", state.budget)
print("covered at reset:\n", state.coverage.astype(int))

rewards = RewardParams()
# landing outside the blue zone is refused but still costs a budget unit
plan = [Action.SOUTH, Action.SOUTH, Action.EAST, Action.EAST, Action.LAND, Action.EAST,
        Action.NORTH, Action.NORTH, Action.WEST, Action.WEST, Action.WEST, Action.LAND]
for a in plan:
    state, r, done, info = step(state, a, rewards)
    flag = "" if info.accepted else "  (rejected by the safety controller)"
    print(f"{a.name:5s} -> {state.position} budget {state.budget:2d} reward {r:+.1f}{flag}")
    if done:
        break

print("landed:", state.landed, "coverage ratio:", state.coverage_ratio())

# the network sees five stacked channels plus the budget scalar
obs = encode_observation(state, budget_norm=20)
print("observation", obs.spatial.shape, "budget scalar", obs.budget_scalar)
