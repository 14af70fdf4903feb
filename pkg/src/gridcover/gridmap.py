"""Three-channel coverage maps: parsing, serialization and zone queries.

Map documents are UTF-8 text. Lines starting with ``#`` are comments, the
remaining non-empty lines form a square character grid::

    .  free cell
    L  start / landing zone
    T  target zone
    X  no-fly zone
    Y  target and no-fly
    M  target and start / landing
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# char -> (start_land, target, no_fly)
CHAR_TO_BITS = {
    ".": (False, False, False),
    "L": (True, False, False),
    "T": (False, True, False),
    "X": (False, False, True),
    "Y": (False, True, True),
    "M": (True, True, False),
}
BITS_TO_CHAR = {bits: ch for ch, bits in CHAR_TO_BITS.items()}

MAPS_DIR = Path(__file__).parent / "maps"


class MapError(ValueError):
    """Raised for malformed or inconsistent map documents."""


@dataclass(frozen=True, eq=False)
class MapGrid:
    start_land: np.ndarray
    target: np.ndarray
    no_fly: np.ndarray

    def __post_init__(self):
        channels = []
        for name in ("start_land", "target", "no_fly"):
            arr = np.array(getattr(self, name), dtype=bool)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            channels.append(arr)
        shape = channels[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or shape[0] == 0:
            raise MapError(f"map must be a non-empty square grid, got shape {shape}")
        if any(c.shape != shape for c in channels):
            raise MapError("channel shapes differ")
        clash = np.argwhere(self.start_land & self.no_fly)
        if len(clash):
            cells = ", ".join(f"({r},{c})" for r, c in clash)
            raise MapError(f"start/landing cells may not be no-fly: {cells}")
        if not self.start_land.any():
            raise MapError("map has no start/landing cell")

    @property
    def size(self) -> int:
        return self.start_land.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MapGrid):
            return NotImplemented
        return (
            np.array_equal(self.start_land, other.start_land)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.no_fly, other.no_fly)
        )

    __hash__ = None

    def start_cells(self) -> list[tuple[int, int]]:
        """Start/landing cells in row-major order."""
        return [(int(r), int(c)) for r, c in np.argwhere(self.start_land)]

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.size and 0 <= c < self.size

    def is_no_fly(self, cell) -> bool:
        return bool(self.no_fly[cell])

    def is_landing(self, cell) -> bool:
        return bool(self.start_land[cell])

    def n_targets(self) -> int:
        return int(self.target.sum())

    def counts(self) -> dict[str, int]:
        return {
            "start_land": int(self.start_land.sum()),
            "target": int(self.target.sum()),
            "no_fly": int(self.no_fly.sum()),
        }

    def as_array(self) -> np.ndarray:
        """Channels stacked last: (N, N, 3) float32 in start/target/no-fly order."""
        return np.stack([self.start_land, self.target, self.no_fly], axis=-1).astype(np.float32)


def parse_map(text: str) -> MapGrid:
    rows = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rows.append(stripped)
    if not rows:
        raise MapError("map document contains no grid rows")
    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != n:
            raise MapError(f"map must be square: row {i} has {len(row)} cells, expected {n}")

    start = np.zeros((n, n), dtype=bool)
    target = np.zeros((n, n), dtype=bool)
    no_fly = np.zeros((n, n), dtype=bool)
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            try:
                s, t, x = CHAR_TO_BITS[ch]
            except KeyError:
                raise MapError(f"unknown map character {ch!r} at ({r},{c})") from None
            start[r, c], target[r, c], no_fly[r, c] = s, t, x
    return MapGrid(start, target, no_fly)


def serialize_map(grid: MapGrid, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    for r in range(grid.size):
        lines.append("".join(
            BITS_TO_CHAR[(bool(grid.start_land[r, c]), bool(grid.target[r, c]), bool(grid.no_fly[r, c]))]
            for c in range(grid.size)
        ))
    return "\n".join(lines)


def load_map(path) -> MapGrid:
    return parse_map(Path(path).read_text(encoding="utf-8"))


def save_map(grid: MapGrid, path, header: str | None = None) -> None:
    Path(path).write_text(serialize_map(grid, header) + "\n", encoding="utf-8")


def builtin_map(name: str) -> MapGrid:
    """Load one of the maps shipped with the package (``smoke6``, ``corridor``, ``map_a`` ...)."""
    path = MAPS_DIR / f"{name}.map"
    if not path.exists():
        available = sorted(p.stem for p in MAPS_DIR.glob("*.map"))
        raise MapError(f"no builtin map {name!r}; available: {available}")
    return load_map(path)
