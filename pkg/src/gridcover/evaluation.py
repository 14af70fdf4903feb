"""Greedy-policy metrics: landing-ratio sweep, coverage curve, SVG trajectory plots.

SVG palette (fill colours, ``#rrggbb``)::

    free cell            #f0f0f0
    no-fly               #d62728  (red)
    start / landing      #1f4fd6  (blue)
    target               #2ca02c  (green)
    target + no-fly      #8c6d1f
    target + landing     #17becf
    start cell           #ffd700  (yellow)
    landing cell         #ffffff  (white, only after an accepted land)
    trajectory arrows    #c00000

Covered cells are drawn blended halfway towards white.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .environment import MOVES, Action, RewardParams
from .gridmap import MapGrid
from .nn import QNetwork
from .trainer import Rollout, evaluate_greedy

CELL = 32

FREE = "#f0f0f0"
NO_FLY = "#d62728"
LANDING = "#1f4fd6"
TARGET = "#2ca02c"
TARGET_NO_FLY = "#8c6d1f"
TARGET_LANDING = "#17becf"
START = "#ffd700"
LANDED = "#ffffff"
ARROW = "#c00000"


@dataclass(frozen=True)
class SweepCase:
    start: tuple[int, int]
    budget: int
    landed: bool
    steps: int
    coverage_ratio: float
    ret: float


@dataclass
class SweepResult:
    cases: list

    @property
    def ratio(self) -> float:
        return sum(c.landed for c in self.cases) / len(self.cases) if self.cases else 0.0

    @property
    def mean_coverage(self) -> float:
        return float(np.mean([c.coverage_ratio for c in self.cases])) if self.cases else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start_row", "start_col", "budget", "landed", "steps", "coverage_ratio"])
            for c in self.cases:
                w.writerow([c.start[0], c.start[1], c.budget, int(c.landed), c.steps, f"{c.coverage_ratio:.6f}"])


def _budgets(budget_range):
    lo, hi = budget_range
    return range(int(lo), int(hi) + 1)


def landing_ratio_sweep(net: QNetwork, grid: MapGrid, budget_range, rewards=RewardParams(),
                        budget_norm: float | None = None, jobs: int = 1) -> SweepResult:
    """Greedy rollouts over every (start cell, budget) pair.

    ``budget_norm`` defaults to the top of ``budget_range``, matching training.
    """
    norm = float(budget_range[1] if budget_norm is None else budget_norm)
    keys = [(s, b) for s in grid.start_cells() for b in _budgets(budget_range)]

    def run(key):
        start, budget = key
        r = evaluate_greedy(net, grid, start, budget, rewards, norm)
        return SweepCase(start, budget, r.landed, r.steps, r.coverage_ratio, r.ret)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(zip(keys, pool.map(run, keys)))
    else:
        results = {k: run(k) for k in keys}
    return SweepResult([results[k] for k in sorted(results)])


def coverage_curve(net: QNetwork, grid: MapGrid, start, budget_range, rewards=RewardParams(),
                   budget_norm: float | None = None) -> list[tuple[int, float]]:
    if not (grid.in_bounds(start) and grid.is_landing(start)):
        raise ValueError(f"start cell {tuple(start)} is not in the start/landing zone")
    norm = float(budget_range[1] if budget_norm is None else budget_norm)
    return [(b, evaluate_greedy(net, grid, start, b, rewards, norm).coverage_ratio)
            for b in _budgets(budget_range)]


def curve_trend(curve) -> float:
    """Fraction of consecutive budget steps where coverage does not drop."""
    if len(curve) < 2:
        return 1.0
    ratios = [c for _, c in curve]
    return sum(b >= a for a, b in zip(ratios, ratios[1:])) / (len(ratios) - 1)


def write_curve_csv(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["budget", "coverage_ratio"])
        for b, c in curve:
            w.writerow([b, f"{c:.6f}"])


# ---------------------------------------------------------------- rendering

def _lighten(hex_colour: str) -> str:
    rgb = [int(hex_colour[i:i + 2], 16) for i in (1, 3, 5)]
    return "#" + "".join(f"{(v + 255) // 2:02x}" for v in rgb)


def _cell_colour(grid: MapGrid, r: int, c: int) -> str:
    s, t, x = grid.start_land[r, c], grid.target[r, c], grid.no_fly[r, c]
    if t and x:
        return TARGET_NO_FLY
    if t and s:
        return TARGET_LANDING
    if x:
        return NO_FLY
    if s:
        return LANDING
    if t:
        return TARGET
    return FREE


def render_svg(grid: MapGrid, trajectory, coverage=None, budget: int | None = None) -> str:
    """SVG document for a rollout; a pure function of its inputs."""
    n = grid.size
    size = n * CELL
    if coverage is None:
        coverage = np.zeros((n, n), dtype=bool)
    start = trajectory[0][0] if trajectory else None
    landed_at = None
    if trajectory:
        pos, action, accepted = trajectory[-1]
        if Action(action) == Action.LAND and accepted:
            landed_at = pos

    used = len(trajectory)
    title = f"{used}/{budget if budget is not None else used} movement"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + CELL}" '
        f'viewBox="0 0 {size} {size + CELL}">',
        f"<title>{escape(title)}</title>",
        "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" "
        f"orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"{ARROW}\"/></marker></defs>",
    ]
    for r in range(n):
        for c in range(n):
            colour = _cell_colour(grid, r, c)
            if coverage[r, c]:
                colour = _lighten(colour)
            if start is not None and (r, c) == tuple(start):
                colour = START
            if landed_at is not None and (r, c) == tuple(landed_at):
                colour = LANDED
            out.append(f'<rect x="{c * CELL}" y="{r * CELL}" width="{CELL}" height="{CELL}" '
                       f'fill="{colour}" stroke="#404040" stroke-width="1"/>')
    half = CELL // 2
    for pos, action, accepted in trajectory:
        action = Action(action)
        if not accepted or action == Action.LAND:
            continue
        dr, dc = MOVES[action]
        r, c = pos
        out.append(f'<line class="move" x1="{c * CELL + half}" y1="{r * CELL + half}" '
                   f'x2="{(c + dc) * CELL + half}" y2="{(r + dr) * CELL + half}" '
                   f'stroke="{ARROW}" stroke-width="3" marker-end="url(#head)"/>')
    out.append(f'<text x="4" y="{size + CELL - 10}" font-family="monospace" font-size="14">'
               f"{escape(title)}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trajectory(grid: MapGrid, trajectory, coverage, path, budget: int | None = None) -> str:
    svg = render_svg(grid, trajectory, coverage, budget)
    Path(path).write_text(svg, encoding="utf-8")
    return svg


def render_rollout(grid: MapGrid, rollout: Rollout, path) -> str:
    return render_trajectory(grid, rollout.trajectory, rollout.coverage, path, rollout.budget)
