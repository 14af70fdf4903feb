"""Coverage path planning with a movement budget, learned by double deep Q-learning."""
from .agent import AgentParams, ddqn_targets, greedy_action, softmax_policy, train_batch
from .environment import (
    Action,
    EnvState,
    Experience,
    Observation,
    RewardParams,
    encode_observation,
    fov_cells,
    reset,
    step,
)
from .evaluation import coverage_curve, landing_ratio_sweep, render_svg, render_trajectory
from .gridmap import MapError, MapGrid, builtin_map, load_map, parse_map, save_map, serialize_map
from .nn import Adam, NetworkArch, QNetwork, load_checkpoint, save_checkpoint, soft_update
from .replay import ReplayBuffer
from .trainer import TrainConfig, TrainLog, evaluate_greedy, train

__all__ = [
    "Action", "Adam", "AgentParams", "EnvState", "Experience", "MapError", "MapGrid",
    "NetworkArch", "Observation", "QNetwork", "ReplayBuffer", "RewardParams", "TrainConfig",
    "TrainLog", "builtin_map", "coverage_curve", "ddqn_targets", "encode_observation",
    "evaluate_greedy", "fov_cells", "greedy_action", "landing_ratio_sweep", "load_checkpoint",
    "load_map", "parse_map", "render_svg", "render_trajectory", "reset", "save_checkpoint",
    "save_map", "serialize_map", "soft_update", "softmax_policy", "step", "train", "train_batch",
]
