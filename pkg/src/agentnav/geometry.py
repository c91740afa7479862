"""Grid geometry shared by the simulator, the belief map and the planners.

Cells are ``(row, col)`` tuples. Headings are degrees clockwise from north,
where north is decreasing row and east is increasing column.
"""

from __future__ import annotations

import math

Cell = tuple[int, int]

UNKNOWN, FREE, OCCUPIED = -1, 0, 1

# Expansion order matters for deterministic planning: N, E, S, W.
NEIGHBORS4: tuple[Cell, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))

STEP_HEADINGS = {(-1, 0): 0.0, (0, 1): 90.0, (1, 0): 180.0, (0, -1): 270.0}


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's precondition."""


def supercover(a: Cell, b: Cell) -> list[Cell]:
    """Every cell touched by the segment joining the centers of ``a`` and ``b``.

    Cells are returned in traversal order starting with ``a`` and ending with
    ``b``. When the segment passes exactly through a cell corner, both side
    cells are included (before the diagonal cell), so no line of sight can
    slip between two diagonally touching walls.
    """
    r, c = a
    r1, c1 = b
    dr, dc = abs(r1 - r), abs(c1 - c)
    sr = 1 if r1 > r else -1
    sc = 1 if c1 > c else -1
    # error > 0: the next vertical boundary (column step) comes first
    error = dc - dr
    dr2, dc2 = 2 * dr, 2 * dc
    cells = [(r, c)]
    while (r, c) != (r1, c1):
        if error > 0:
            c += sc
            error -= dr2
        elif error < 0:
            r += sr
            error += dc2
        else:
            cells.append((r, c + sc))
            cells.append((r + sr, c))
            r += sr
            c += sc
            error += dc2 - dr2
        cells.append((r, c))
    return cells


def cell_distance(a: Cell, b: Cell) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def bearing(src: Cell, dst: Cell) -> float:
    """Absolute bearing from ``src`` to ``dst`` in [0, 360)."""
    ang = math.degrees(math.atan2(dst[1] - src[1], src[0] - dst[0]))
    return normalize_heading(ang)


def normalize_heading(deg: float) -> float:
    h = deg % 360.0
    if h >= 360.0:
        h -= 360.0
    return h + 0.0  # drop negative zero


def relative_angle(heading: float, absolute: float) -> float:
    """Signed angle from ``heading`` to ``absolute`` in (-180, 180]."""
    d = (absolute - heading) % 360.0
    if d > 180.0:
        d -= 360.0
    return d + 0.0


def is_adjacent4(a: Cell, b: Cell) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def as_cell(value) -> Cell:
    r, c = value
    return (int(r), int(c))
