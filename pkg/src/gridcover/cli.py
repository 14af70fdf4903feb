"""Command line entry point: ``gridcover train|eval|render|map-validate``.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 training diverged.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


from . import evaluation
from .environment import RewardParams
from .gridmap import MapError, load_map
from .nn import CheckpointError, load_checkpoint, save_checkpoint
from .trainer import ConfigError, TrainConfig, TrainingDiverged, evaluate_greedy, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

CKPT_NAME = "ckpt"
EPISODES_CSV = "episodes.csv"
EVALS_CSV = "evals.csv"
CONFIG_ECHO = "config.cfg"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _cell(text: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return r, c


def _budgets(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid budget range {text!r}")
    return lo, hi


def _default_seed():
    env = os.environ.get("GRIDCOVER_SEED")
    return int(env) if env not in (None, "") else None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridcover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train a DDQN agent on a map")
    p.add_argument("--map", required=True, type=Path)
    p.add_argument("--config", type=Path, help="key = value file; flags override it")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--episodes", type=int, help="override n_episodes")
    p.add_argument("--budgets", type=_budgets, help="override budget range, LO:HI")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--log-every", type=int, default=50, help="progress line every K episodes (0 = off)")

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    esub = p.add_subparsers(dest="eval_command", parser_class=_Parser)
    for name in ("sweep", "curve"):
        q = esub.add_parser(name)
        q.add_argument("--ckpt", required=True, type=Path)
        q.add_argument("--map", required=True, type=Path)
        q.add_argument("--budgets", required=True, type=_budgets)
        q.add_argument("--config", type=Path, help="training config (reward values)")
        q.add_argument("--out", type=Path, help="CSV output path")
        if name == "sweep":
            q.add_argument("--jobs", type=int, default=1)
        else:
            q.add_argument("--start", required=True, type=_cell)

    p = sub.add_parser("render", help="render a greedy trajectory as SVG")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--map", required=True, type=Path)
    p.add_argument("--start", required=True, type=_cell)
    p.add_argument("--budget", required=True, type=int)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("map-validate", help="check a map file and print zone counts")
    p.add_argument("map", type=Path)
    return parser


def _read_map(path: Path):
    if not path.exists():
        raise DataError(f"map file not found: {path}")
    try:
        return load_map(path)
    except MapError as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_config(path: Path | None, **overrides) -> TrainConfig:
    if path is not None and not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        if path is None:
            return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})
        return TrainConfig.from_file(path, **overrides)
    except (ConfigError, TypeError) as exc:
        raise DataError(f"invalid config: {exc}") from None


def _read_ckpt(path: Path, grid):
    if path.is_dir():
        path = path / CKPT_NAME
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path, expected_size=grid.size)
    except CheckpointError as exc:
        raise DataError(str(exc)) from None


def _rewards(config_path: Path | None) -> RewardParams:
    return RewardParams() if config_path is None else _read_config(config_path).rewards


def cmd_train(args) -> int:
    grid = _read_map(args.map)
    overrides = {"seed": args.seed, "n_episodes": args.episodes, "map_path": str(args.map)}
    if args.budgets:
        overrides["budget_min"], overrides["budget_max"] = args.budgets
    config = _read_config(args.config, **overrides)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / CONFIG_ECHO).write_text(config.to_text(), encoding="utf-8")

    def progress(rec):
        if args.log_every and (rec.episode + 1) % args.log_every == 0:
            print(f"episode {rec.episode + 1:6d}  return {rec.ret:8.2f}  steps {rec.steps:3d}  "
                  f"landed {int(rec.landed)}  coverage {rec.coverage_ratio:.2f}", flush=True)

    try:
        net, log = train(config, grid, progress=progress)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    save_checkpoint(net, args.out / CKPT_NAME)
    log.write_csv(args.out / EPISODES_CSV, args.out / EVALS_CSV)
    print(f"wrote {args.out / CKPT_NAME}, {EPISODES_CSV}, {EVALS_CSV}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.eval_command is None:
        raise UsageError("gridcover eval: choose 'sweep' or 'curve'")
    grid = _read_map(args.map)
    net = _read_ckpt(args.ckpt, grid)
    rewards = _rewards(args.config)
    norm = net.meta.get("budget_norm")
    if args.eval_command == "sweep":
        result = evaluation.landing_ratio_sweep(net, grid, args.budgets, rewards, norm, jobs=args.jobs)
        if args.out:
            result.write_csv(args.out)
        print(f"episodes {len(result.cases)} = {len(grid.start_cells())} starts x "
              f"{args.budgets[1] - args.budgets[0] + 1} budgets")
        print(f"landing ratio {result.ratio:.4f}")
        print(f"mean coverage {result.mean_coverage:.4f}")
        return EXIT_OK
    start = args.start
    if not (grid.in_bounds(start) and grid.is_landing(start)):
        raise DataError(f"start cell {start[0]},{start[1]} is not in the start/landing zone")
    curve = evaluation.coverage_curve(net, grid, start, args.budgets, rewards, norm)
    if args.out:
        evaluation.write_curve_csv(curve, args.out)
    for b, c in curve:
        print(f"{b}\t{c:.4f}")
    print(f"non-decreasing steps {evaluation.curve_trend(curve):.2f}")
    return EXIT_OK


def cmd_render(args) -> int:
    if args.budget < 1:
        raise UsageError("--budget must be at least 1")
    grid = _read_map(args.map)
    if not (grid.in_bounds(args.start) and grid.is_landing(args.start)):
        raise DataError(f"start cell {args.start[0]},{args.start[1]} is not in the start/landing zone")
    net = _read_ckpt(args.ckpt, grid)
    rollout = evaluate_greedy(net, grid, args.start, args.budget, _rewards(args.config),
                              net.meta.get("budget_norm"))
    evaluation.render_rollout(grid, rollout, args.out)
    print(f"wrote {args.out} ({rollout.steps}/{args.budget} movement, landed {int(rollout.landed)})")
    return EXIT_OK


def cmd_map_validate(args) -> int:
    grid = _read_map(args.map)
    counts = grid.counts()
    print(f"N = {grid.size}")
    for name, n in counts.items():
        print(f"{name} = {n}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "render": cmd_render, "map-validate": cmd_map_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
