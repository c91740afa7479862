"""Planning and geometric reasoning on the belief grid.

Unknown cells block visibility and, unless ``optimistic`` is set, planning.
"""

from __future__ import annotations

import heapq
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Callable

from .errors import ToolError
from .geometry import FREE, NEIGHBORS4, OCCUPIED, UNKNOWN, Cell, ContractViolation, manhattan, supercover
from .llmlink.base import BackendError, ChatTurn
from .mapping import Frontier, OccupancyGrid, extract_frontiers, integrate
from .prompts import system_prompt
from .scenegraph import Layer, SceneGraph
from .worldsim import GridWorld, Observation, Pose, move_robot

MAX_REPLANS = 3


@dataclass(frozen=True)
class Path:
    cells: tuple[Cell, ...]
    resolution: float = 0.25

    @property
    def length_m(self) -> float:
        return (len(self.cells) - 1) * self.resolution


class _Complete:
    """Sentinel: no frontiers remain."""

    def __repr__(self) -> str:
        return "ExplorationComplete"

    def __bool__(self) -> bool:
        return False


ExplorationComplete = _Complete()


def _traversable(grid: OccupancyGrid, cell: Cell, optimistic: bool) -> bool:
    if not grid.in_bounds(cell):
        return False
    s = grid.cells[cell]
    return s == FREE or (optimistic and s == UNKNOWN)


def astar(grid: OccupancyGrid, start: Cell, goal: Cell, optimistic: bool = False) -> Path | None:
    """Fewest-cell 4-connected path, or None.

    Ties on f are broken by lower heuristic, then by insertion order;
    neighbors expand N, E, S, W. Identical inputs give identical paths.
    """
    start, goal = tuple(start), tuple(goal)
    if not grid.is_free(start):
        raise ContractViolation(f"start {start} is not known-free")
    if start != goal and not _traversable(grid, goal, optimistic):
        return None
    counter = itertools.count()
    h0 = manhattan(start, goal)
    heap = [(h0, h0, next(counter), start)]
    g = {start: 0}
    parent: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    while heap:
        _, _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            cells = [cur]
            while cur in parent:
                cur = parent[cur]
                cells.append(cur)
            return Path(tuple(reversed(cells)), grid.resolution)
        closed.add(cur)
        for dr, dc in NEIGHBORS4:
            nxt = (cur[0] + dr, cur[1] + dc)
            if nxt in closed or not _traversable(grid, nxt, optimistic):
                continue
            ng = g[cur] + 1
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = cur
                h = manhattan(nxt, goal)
                heapq.heappush(heap, (ng + h, h, next(counter), nxt))
    return None


@dataclass
class FollowResult:
    pose: Pose
    observations: list[Observation] = field(default_factory=list)
    status: str = "reached"  # reached | blocked
    moves: int = 0
    replans: int = 0


def follow_path(
    world: GridWorld,
    grid: OccupancyGrid,
    path: Path,
    sense: Callable[[], Observation],
    *,
    optimistic: bool = True,
    max_replans: int = MAX_REPLANS,
    on_move: Callable[[Cell], None] | None = None,
) -> FollowResult:
    """Drive along ``path`` one cell at a time, observing after every move.

    A step into a cell that turns out to be occupied (seen, or bumped into)
    triggers a replan on the updated belief, at most ``max_replans`` times.
    """
    if not path.cells or tuple(path.cells[0]) != world.robot_cell:
        raise ContractViolation("path not anchored at robot cell")
    goal = tuple(path.cells[-1])
    cells = list(path.cells)
    i = 0
    result = FollowResult(world.robot)
    while world.robot_cell != goal:
        nxt = tuple(cells[i + 1])
        blocked = grid.state(nxt) == OCCUPIED
        if not blocked:
            move = move_robot(world, nxt)
            if move.blocked:
                grid.mark(nxt, OCCUPIED)
                blocked = True
        if blocked:
            if result.replans >= max_replans:
                result.status = "blocked"
                break
            result.replans += 1
            new = astar(grid, world.robot_cell, goal, optimistic)
            if new is None:
                result.status = "blocked"
                break
            cells, i = list(new.cells), 0
            continue
        i += 1
        result.moves += 1
        if on_move is not None:
            on_move(nxt)
        obs = sense()
        integrate(grid, obs)
        result.observations.append(obs)
    result.pose = world.robot
    return result


def visibility(grid: OccupancyGrid, a: Cell, b: Cell) -> bool:
    """Every cell on the supercover segment, endpoints included, is known-free."""
    return all(grid.cells[c] == FREE for c in supercover(tuple(a), tuple(b)))


def reachable(grid: OccupancyGrid, a: Cell, b: Cell) -> bool:
    if not grid.is_free(tuple(a)):
        return False
    return astar(grid, a, b) is not None


def shortest_path_length(grid: OccupancyGrid, a: Cell, b: Cell) -> float | None:
    if not grid.is_free(tuple(a)):
        return None
    path = astar(grid, a, b)
    return None if path is None else path.length_m


def proximity(
    graph: SceneGraph, node_id: str, radius_m: float, resolution: float = 0.25, label: str | None = None
) -> list[str]:
    """Object/region nodes within ``radius_m`` of a node, nearest first."""
    from .scenegraph import label_matches

    if node_id not in graph.nodes:
        raise KeyError(f"unknown node id {node_id!r}")
    ar, ac = graph.nodes[node_id].anchor
    hits = []
    for node in graph.nodes.values():
        if node.id == node_id or node.layer not in (Layer.OBJECT, Layer.REGION):
            continue
        if label is not None and not label_matches(label, node.label):
            continue
        r, c = node.anchor
        d = math.hypot(r - ar, c - ac) * resolution
        if d <= radius_m + 1e-9:
            hits.append((d, node.id))
    hits.sort()
    return [nid for _, nid in hits]


def _nearest_landmark(cell: Cell, landmarks, resolution: float) -> str:
    best = None
    for lm in landmarks:
        d = math.hypot(lm.cell[0] - cell[0], lm.cell[1] - cell[1]) * resolution
        if best is None or (d, lm.name) < best:
            best = (d, lm.name)
    return "none" if best is None else f"{best[1]} ({best[0]:.2f} m)"


def summarize_frontiers(frontiers: list[Frontier], grid: OccupancyGrid, robot: Cell, landmarks) -> str:
    lines = []
    for i, f in enumerate(frontiers):
        path = astar(grid, robot, f.centroid, optimistic=True) if grid.is_free(robot) else None
        dist = "unreachable" if path is None else f"{path.length_m:.2f} m"
        lines.append(
            f"{i}: centroid ({f.centroid[0]},{f.centroid[1]}), size {f.size}, path {dist}, "
            f"nearest landmark {_nearest_landmark(f.centroid, landmarks, grid.resolution)}"
        )
    return "\n".join(lines)


def explore_frontiers(grid: OccupancyGrid, backend, memory, robot: Cell):
    """Let the backend pick a frontier cluster; returns its centroid.

    Returns ``ExplorationComplete`` when nothing is left to explore. A reply
    without a valid index falls back to the largest cluster.
    """
    frontiers = extract_frontiers(grid)
    if not frontiers:
        return ExplorationComplete
    if len(frontiers) == 1:
        return frontiers[0].centroid
    summary = summarize_frontiers(frontiers, grid, robot, memory.landmarks)
    turns = [
        ChatTurn("system", system_prompt("explore_frontiers")),
        ChatTurn(
            "user",
            f"task: {memory.task_text}\nrobot at ({robot[0]},{robot[1]})\nfrontiers:\n{summary}",
        ),
    ]
    try:
        reply = backend.complete(turns, [])
    except BackendError as exc:
        raise ToolError(f"frontier selection failed: {exc}") from exc
    m = re.search(r"-?\d+", reply.text or "")
    idx = int(m.group()) if m else -1
    if not 0 <= idx < len(frontiers):
        idx = 0
    return frontiers[idx].centroid
