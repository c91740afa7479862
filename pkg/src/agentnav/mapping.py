"""Occupancy-grid belief, frontier extraction, and the landmark-annotated raster."""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterable, Protocol

import numpy as np
from scipy import ndimage

from .geometry import FREE, OCCUPIED, UNKNOWN, Cell

COORDINATE_KEY = "rows top→bottom, cols left→right; ? unknown, . free, # occupied, R robot"
_SYMBOLS = {UNKNOWN: "?", FREE: ".", OCCUPIED: "#"}
_STATES = {v: k for k, v in _SYMBOLS.items()}


class LandmarkOverflow(ValueError):
    """More landmarks than raster symbols."""


class _LandmarkLike(Protocol):
    name: str
    cell: Cell


class OccupancyGrid:
    def __init__(self, height: int, width: int, resolution: float = 0.25):
        self.cells = np.full((height, width), UNKNOWN, dtype=np.int8)
        self.resolution = resolution
        self.observed_count = 0

    @classmethod
    def for_world(cls, world) -> "OccupancyGrid":
        return cls(world.height, world.width, world.resolution)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape  # type: ignore[return-value]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def state(self, cell: Cell) -> int:
        return int(self.cells[cell])

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell] == FREE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.cells != UNKNOWN))

    def mark(self, cell: Cell, state: int) -> None:
        """Record a cell learned outside an observation (e.g. a bump); known cells are kept."""
        if self.cells[cell] == UNKNOWN:
            self.cells[cell] = state

    def copy(self) -> "OccupancyGrid":
        g = OccupancyGrid(self.height, self.width, self.resolution)
        g.cells = self.cells.copy()
        g.observed_count = self.observed_count
        return g


def integrate(grid: OccupancyGrid, obs) -> OccupancyGrid:
    """Write an observation's visible cells into the belief (in place)."""
    if tuple(obs.shape) != grid.shape:
        raise ValueError(f"dimension mismatch: observation {tuple(obs.shape)} vs grid {grid.shape}")
    for cell, state in obs.visible_cells:
        if grid.cells[cell] == UNKNOWN:
            grid.cells[cell] = state
    grid.observed_count += 1
    return grid


@dataclass(frozen=True)
class Frontier:
    cells: tuple[Cell, ...]
    centroid: Cell

    @property
    def size(self) -> int:
        return len(self.cells)


def frontier_mask(cells: np.ndarray) -> np.ndarray:
    unknown = np.pad(cells == UNKNOWN, 1, constant_values=False)
    near_unknown = unknown[:-2, 1:-1] | unknown[2:, 1:-1] | unknown[1:-1, :-2] | unknown[1:-1, 2:]
    return (cells == FREE) & near_unknown


def _centroid(members: list[Cell]) -> Cell:
    # distances scaled by n^2 so ties are exact
    n = len(members)
    sr = sum(r for r, _ in members)
    sc = sum(c for _, c in members)
    return min(members, key=lambda p: ((n * p[0] - sr) ** 2 + (n * p[1] - sc) ** 2, p))


def extract_frontiers(grid: OccupancyGrid) -> list[Frontier]:
    """Free cells touching unknown space, clustered under 8-adjacency.

    Clusters come largest first, ties broken by centroid. The centroid is
    the member cell nearest the cluster mean, so it is always a valid
    navigation goal.
    """
    mask = frontier_mask(grid.cells)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    clusters = []
    for k in range(1, n + 1):
        rows, cols = np.nonzero(labels == k)
        members = sorted(zip(rows.tolist(), cols.tolist()))
        clusters.append(Frontier(tuple(members), _centroid(members)))
    clusters.sort(key=lambda f: (-f.size, f.centroid))
    return clusters


def render_raster(grid: OccupancyGrid, landmarks: Iterable[_LandmarkLike], robot: Cell | None) -> str:
    """Top-down text raster: one character per cell plus a landmark legend."""
    marks = list(landmarks)
    if len(marks) > len(string.ascii_uppercase):
        raise LandmarkOverflow(f"landmark alphabet exhausted ({len(marks)} landmarks, max 26)")
    rows = [[_SYMBOLS[int(v)] for v in row] for row in grid.cells]
    legend = []
    for sym, lm in zip(string.ascii_uppercase, marks):
        r, c = lm.cell
        if not grid.in_bounds((r, c)):
            raise ValueError(f"landmark {lm.name!r} at {(r, c)} out of bounds")
        rows[r][c] = sym
        legend.append(f"{sym}: {lm.name} ({r},{c})")
    if robot is not None:
        rows[robot[0]][robot[1]] = "R"
    body = "\n".join("".join(row) for row in rows)
    legend_text = "\n".join(legend) if legend else "(none)"
    return f"{COORDINATE_KEY}\n{body}\nlegend:\n{legend_text}"


def parse_raster(text: str) -> tuple[np.ndarray, dict[str, tuple[str, Cell]]]:
    """Inverse of :func:`render_raster` for terrain.

    Returns the terrain array (robot and landmark cells hold ``None``) and
    the legend as ``symbol -> (name, cell)``.
    """
    lines = text.split("\n")
    if lines[0] != COORDINATE_KEY:
        raise ValueError("missing coordinate key")
    idx = lines.index("legend:")
    body = lines[1:idx]
    terrain = np.empty((len(body), len(body[0]) if body else 0), dtype=object)
    for r, row in enumerate(body):
        for c, ch in enumerate(row):
            terrain[r, c] = _STATES.get(ch)
    legend: dict[str, tuple[str, Cell]] = {}
    for line in lines[idx + 1 :]:
        if line == "(none)" or not line:
            continue
        sym, rest = line.split(": ", 1)
        name, coords = rest.rsplit(" (", 1)
        r, c = coords.rstrip(")").split(",")
        legend[sym] = (name, (int(r), int(c)))
    return terrain, legend
