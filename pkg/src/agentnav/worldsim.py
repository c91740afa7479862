"""Deterministic 2D grid world: ground truth, raycast observations, robot motion."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .geometry import (
    FREE,
    NEIGHBORS4,
    OCCUPIED,
    STEP_HEADINGS,
    Cell,
    ContractViolation,
    bearing,
    cell_distance,
    is_adjacent4,
    normalize_heading,
    relative_angle,
    supercover,
)

DEFAULT_RESOLUTION = 0.25
DEFAULT_FOV = 90.0
DEFAULT_RANGE = 3.0

_EPS = 1e-9


class WorldFileError(ValueError):
    """Malformed world document or a violated world invariant."""


@dataclass(frozen=True)
class WorldObject:
    id: str
    label: str
    cell: Cell
    room_id: str | None = None


@dataclass(frozen=True)
class Room:
    id: str
    label: str
    rect: tuple[int, int, int, int]  # r0, c0, r1, c1 inclusive

    def contains(self, cell: Cell) -> bool:
        r0, c0, r1, c1 = self.rect
        return r0 <= cell[0] <= r1 and c0 <= cell[1] <= c1

    def overlaps(self, other: "Room") -> bool:
        a, b = self.rect, other.rect
        return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


@dataclass(frozen=True)
class Pose:
    x: float  # meters, along columns
    y: float  # meters, along rows
    heading: float

    @classmethod
    def at_cell(cls, cell: Cell, heading: float, resolution: float) -> "Pose":
        return cls((cell[1] + 0.5) * resolution, (cell[0] + 0.5) * resolution, normalize_heading(heading))

    def cell(self, resolution: float) -> Cell:
        return (int(math.floor(self.y / resolution)), int(math.floor(self.x / resolution)))


@dataclass(frozen=True)
class Detection:
    object_id: str
    label: str
    range_m: float
    bearing_deg: float  # relative to robot heading, (-180, 180]
    cell: Cell


@dataclass(frozen=True)
class Observation:
    timestep: int
    pose: Pose
    robot_cell: Cell
    shape: tuple[int, int]
    visible_cells: tuple[tuple[Cell, int], ...]
    detections: tuple[Detection, ...]
    rendered_view: str

    def detection_text(self) -> str:
        """Detections only, without the local view (used when rasters are ablated)."""
        return _detections_block(self.timestep, self.robot_cell, self.pose.heading, self.detections)

    def to_dict(self) -> dict[str, Any]:
        return {
            "timestep": self.timestep,
            "cell": list(self.robot_cell),
            "heading": self.pose.heading,
            "visible": len(self.visible_cells),
            "detections": [d.object_id for d in self.detections],
        }


class Move(NamedTuple):
    pose: Pose
    blocked: bool


@dataclass
class GridWorld:
    width: int
    height: int
    occupied: np.ndarray  # bool, shape (height, width)
    objects: list[WorldObject] = field(default_factory=list)
    rooms: list[Room] = field(default_factory=list)
    robot: Pose = Pose(0.125, 0.125, 0.0)
    resolution: float = DEFAULT_RESOLUTION
    seed: int = 0
    miss_probability: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.occupied[cell]

    @property
    def robot_cell(self) -> Cell:
        return self.robot.cell(self.resolution)

    def room_at(self, cell: Cell) -> Room | None:
        for room in self.rooms:
            if room.contains(cell):
                return room
        return None

    def object(self, object_id: str) -> WorldObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def copy(self) -> "GridWorld":
        return load_world(self.to_dict())

    def to_dict(self) -> dict[str, Any]:
        rows, cols = np.nonzero(self.occupied)
        doc: dict[str, Any] = {
            "width": self.width,
            "height": self.height,
            "resolution": self.resolution,
            "occupied": [[int(r), int(c)] for r, c in zip(rows, cols)],
            "objects": [
                {"id": o.id, "label": o.label, "cell": list(o.cell), "room": o.room_id} for o in self.objects
            ],
            "rooms": [{"id": r.id, "label": r.label, "rect": list(r.rect)} for r in self.rooms],
            "robot": {"cell": list(self.robot_cell), "heading": self.robot.heading},
            "seed": self.seed,
        }
        if self.miss_probability:
            doc["miss_probability"] = self.miss_probability
        return doc


def serialize_world(world: GridWorld) -> str:
    return json.dumps(world.to_dict(), indent=2) + "\n"


def _cell_field(value: Any, where: str) -> Cell:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise WorldFileError(f"{where}: expected [row, col] integer pair")
    return (value[0], value[1])


def load_world(document: str | bytes | dict) -> GridWorld:
    """Parse and validate a world document (JSON text or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise WorldFileError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise WorldFileError("world document must be a JSON object")

    for key in ("width", "height", "robot"):
        if key not in doc:
            raise WorldFileError(f"{key}: missing required field")
    width, height = doc["width"], doc["height"]
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise WorldFileError(f"{name}: expected positive integer")
    resolution = doc.get("resolution", DEFAULT_RESOLUTION)
    if not isinstance(resolution, (int, float)) or isinstance(resolution, bool) or resolution <= 0:
        raise WorldFileError("resolution: expected positive number")
    resolution = float(resolution)

    def in_bounds(cell: Cell) -> bool:
        return 0 <= cell[0] < height and 0 <= cell[1] < width

    occupied = np.zeros((height, width), dtype=bool)
    for i, raw in enumerate(doc.get("occupied", [])):
        cell = _cell_field(raw, f"occupied[{i}]")
        if not in_bounds(cell):
            raise WorldFileError(f"occupied[{i}]: cell {cell} out of bounds")
        occupied[cell] = True

    rooms: list[Room] = []
    for i, raw in enumerate(doc.get("rooms", [])):
        where = f"rooms[{i}]"
        if not isinstance(raw, dict):
            raise WorldFileError(f"{where}: expected object")
        rid, label, rect = raw.get("id"), raw.get("label"), raw.get("rect")
        if not isinstance(rid, str) or not rid:
            raise WorldFileError(f"{where}.id: expected non-empty string")
        if not isinstance(label, str) or not label.strip():
            raise WorldFileError(f"{where}.label: expected non-empty string")
        if (
            not isinstance(rect, list)
            or len(rect) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in rect)
        ):
            raise WorldFileError(f"{where}.rect: expected [r0, c0, r1, c1]")
        r0, c0, r1, c1 = rect
        if r0 > r1 or c0 > c1 or not in_bounds((r0, c0)) or not in_bounds((r1, c1)):
            raise WorldFileError(f"{where}.rect: rectangle {rect} out of bounds or inverted")
        room = Room(rid, " ".join(label.lower().split()), (r0, c0, r1, c1))
        for other in rooms:
            if other.id == rid:
                raise WorldFileError(f"{where}.id: duplicate room id {rid!r}")
            if other.overlaps(room):
                raise WorldFileError(f"{where}: room {rid!r} overlaps room {other.id!r}")
        rooms.append(room)

    objects: list[WorldObject] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(doc.get("objects", [])):
        where = f"objects[{i}]"
        if not isinstance(raw, dict):
            raise WorldFileError(f"{where}: expected object")
        oid, label = raw.get("id"), raw.get("label")
        if not isinstance(oid, str) or not oid:
            raise WorldFileError(f"{where}.id: expected non-empty string")
        if oid in seen_ids:
            raise WorldFileError(f"{where}.id: duplicate object id {oid!r}")
        if any(r.id == oid for r in rooms):
            raise WorldFileError(f"{where}.id: object id {oid!r} collides with a room id")
        if not isinstance(label, str) or not label.strip():
            raise WorldFileError(f"{where}.label: expected non-empty string")
        cell = _cell_field(raw.get("cell"), f"{where}.cell")
        if not in_bounds(cell):
            raise WorldFileError(f"{where}.cell: cell {cell} out of bounds")
        if occupied[cell]:
            raise WorldFileError(f"{where}: object {oid!r} on occupied cell {cell}")
        room_id = raw.get("room")
        containing = next((r for r in rooms if r.contains(cell)), None)
        if room_id is None:
            room_id = containing.id if containing else None
        elif containing is None or containing.id != room_id:
            raise WorldFileError(f"{where}.room: cell {cell} is not inside room {room_id!r}")
        seen_ids.add(oid)
        objects.append(WorldObject(oid, " ".join(label.lower().split()), cell, room_id))

    robot_raw = doc["robot"]
    if not isinstance(robot_raw, dict):
        raise WorldFileError("robot: expected object")
    robot_cell = _cell_field(robot_raw.get("cell"), "robot.cell")
    if not in_bounds(robot_cell):
        raise WorldFileError(f"robot.cell: cell {robot_cell} out of bounds")
    if occupied[robot_cell]:
        raise WorldFileError(f"robot.cell: robot on occupied cell {robot_cell}")
    heading = robot_raw.get("heading", 0.0)
    if not isinstance(heading, (int, float)) or isinstance(heading, bool):
        raise WorldFileError("robot.heading: expected number")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise WorldFileError("seed: expected integer")
    miss = doc.get("miss_probability", 0.0)
    if not isinstance(miss, (int, float)) or not 0.0 <= miss < 1.0:
        raise WorldFileError("miss_probability: expected number in [0, 1)")

    return GridWorld(
        width=width,
        height=height,
        occupied=occupied,
        objects=objects,
        rooms=rooms,
        robot=Pose.at_cell(robot_cell, float(heading), resolution),
        resolution=resolution,
        seed=seed,
        miss_probability=float(miss),
    )


def _in_view(src: Cell, dst: Cell, heading: float, fov: float, max_cells: float) -> bool:
    if src == dst:
        return True
    if cell_distance(src, dst) > max_cells + _EPS:
        return False
    if fov >= 360.0:
        return True
    return abs(relative_angle(heading, bearing(src, dst))) <= fov / 2.0 + _EPS


def line_of_sight(occupied: np.ndarray, src: Cell, dst: Cell) -> bool:
    """True when no occupied cell lies on the supercover segment before ``dst``."""
    return not any(occupied[c] for c in supercover(src, dst)[:-1])


def visible_cells(world: GridWorld, fov_degrees: float, max_range: float) -> list[Cell]:
    src = world.robot_cell
    heading = world.robot.heading
    max_cells = max_range / world.resolution
    reach = int(math.floor(max_cells + _EPS))
    out = []
    for r in range(max(0, src[0] - reach), min(world.height, src[0] + reach + 1)):
        for c in range(max(0, src[1] - reach), min(world.width, src[1] + reach + 1)):
            if _in_view(src, (r, c), heading, fov_degrees, max_cells) and line_of_sight(
                world.occupied, src, (r, c)
            ):
                out.append((r, c))
    return out


def observe(
    world: GridWorld,
    fov_degrees: float = DEFAULT_FOV,
    max_range: float = DEFAULT_RANGE,
    timestep: int = 0,
) -> Observation:
    """Sensor snapshot from the robot's current pose."""
    if not 0 < fov_degrees <= 360:
        raise ContractViolation("fov must be in (0, 360]")
    if max_range <= 0:
        raise ContractViolation("max_range must be positive")
    src = world.robot_cell
    cells = visible_cells(world, fov_degrees, max_range)
    visible = tuple((c, OCCUPIED if world.occupied[c] else FREE) for c in cells)
    seen = set(cells)
    dets = []
    for obj in world.objects:
        if obj.cell in seen:
            rng = cell_distance(src, obj.cell) * world.resolution
            rel = 0.0 if obj.cell == src else relative_angle(world.robot.heading, bearing(src, obj.cell))
            dets.append(Detection(obj.id, obj.label, round(rng, 6), round(rel, 6), obj.cell))
    dets.sort(key=lambda d: (d.range_m, d.bearing_deg, d.object_id))
    if world.miss_probability > 0 and dets:
        draws = np.random.default_rng([world.seed, timestep]).random(len(dets))
        dets = [d for d, u in zip(dets, draws) if u >= world.miss_probability]
    dets_t = tuple(dets)
    view = _render_view(timestep, src, world.robot.heading, visible, dets_t)
    return Observation(timestep, world.robot, src, world.shape, visible, dets_t, view)


def _detections_block(timestep: int, cell: Cell, heading: float, dets: tuple[Detection, ...]) -> str:
    lines = [f"view t={timestep} at ({cell[0]},{cell[1]}) heading {heading:g}", "detections:"]
    if not dets:
        lines.append("  (none)")
    for d in dets:
        lines.append(
            f"  {d.label} [{d.object_id}] {d.range_m:.2f} m, bearing {d.bearing_deg:+.1f} deg"
            f" at ({d.cell[0]},{d.cell[1]})"
        )
    return "\n".join(lines)


def _render_view(
    timestep: int, cell: Cell, heading: float, visible: tuple[tuple[Cell, int], ...], dets: tuple[Detection, ...]
) -> str:
    rows = [c[0] for c, _ in visible]
    cols = [c[1] for c, _ in visible]
    r0, r1, c0, c1 = min(rows), max(rows), min(cols), max(cols)
    patch = [[" "] * (c1 - c0 + 1) for _ in range(r1 - r0 + 1)]
    for (r, c), state in visible:
        patch[r - r0][c - c0] = "#" if state == OCCUPIED else "."
    for d in dets:
        patch[d.cell[0] - r0][d.cell[1] - c0] = "o"
    patch[cell[0] - r0][cell[1] - c0] = "R"
    head = _detections_block(timestep, cell, heading, dets)
    body = "\n".join("  |" + "".join(row) + "|" for row in patch)
    return f"{head}\nlocal view rows {r0}..{r1}, cols {c0}..{c1} (R robot, o object, # wall, . free):\n{body}"


def move_robot(world: GridWorld, target: Cell) -> Move:
    """Step the robot to a 4-adjacent cell; blocked moves leave the pose untouched."""
    src = world.robot_cell
    if not is_adjacent4(src, target):
        raise ContractViolation(f"non-adjacent motion from {src} to {tuple(target)}")
    if not world.is_free(target):
        return Move(world.robot, True)
    step = (target[0] - src[0], target[1] - src[1])
    world.robot = Pose.at_cell(target, STEP_HEADINGS[step], world.resolution)
    return Move(world.robot, False)


def rotate_robot(world: GridWorld, delta: float) -> Pose:
    p = world.robot
    world.robot = Pose(p.x, p.y, normalize_heading(p.heading + delta))
    return world.robot


def ground_truth_distance(world: GridWorld, a: Cell, b: Cell) -> int | None:
    """BFS cell-step distance on the true map (None when disconnected)."""
    if not (world.is_free(a) and world.is_free(b)):
        return None
    dist = {a: 0}
    queue = deque([a])
    while queue:
        cur = queue.popleft()
        if cur == b:
            return dist[cur]
        for dr, dc in NEIGHBORS4:
            nxt = (cur[0] + dr, cur[1] + dc)
            if nxt not in dist and world.is_free(nxt):
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return None
