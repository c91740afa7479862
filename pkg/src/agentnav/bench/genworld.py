"""Seeded four-room house generator with a "Where is the X?" task."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..geometry import NEIGHBORS4, Cell
from ..tasks import Task
from ..worldsim import GridWorld, load_world

ROOM_LABELS = ("kitchen", "bedroom", "bathroom", "living room", "office", "dining room", "garage", "laundry room")
OBJECT_LABELS = (
    "banjo", "sofa", "lamp", "backpack", "piano", "toaster", "bookshelf", "plant",
    "television", "guitar", "armchair", "vase", "clock", "laptop", "rug", "bicycle",
)
LETTERS = "ABCDEFGH"


def _connected(occ: np.ndarray) -> bool:
    free = np.argwhere(~occ)
    if len(free) == 0:
        return False
    start = tuple(int(v) for v in free[0])
    seen = {start}
    queue = deque([start])
    h, w = occ.shape
    while queue:
        r, c = queue.popleft()
        for dr, dc in NEIGHBORS4:
            n = (r + dr, c + dc)
            if 0 <= n[0] < h and 0 <= n[1] < w and not occ[n] and n not in seen:
                seen.add(n)
                queue.append(n)
    return len(seen) == len(free)


def generate_world(seed: int, n_objects: int = 6, n_furniture: int = 6) -> tuple[dict, Task]:
    """A world document and its task. Identical seeds give identical output."""
    rng = np.random.default_rng(seed)
    h, w = int(rng.integers(14, 21)), int(rng.integers(14, 21))
    rs, cs = int(rng.integers(6, h - 6)), int(rng.integers(6, w - 6))
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    occ[rs, :] = True
    occ[:, cs] = True
    doors: list[Cell] = [
        (rs, int(rng.integers(1, cs))),
        (rs, int(rng.integers(cs + 1, w - 1))),
        (int(rng.integers(1, rs)), cs),
        (int(rng.integers(rs + 1, h - 1)), cs),
    ]
    for d in doors:
        occ[d] = False
    rects = [(1, 1, rs - 1, cs - 1), (1, cs + 1, rs - 1, w - 2), (rs + 1, 1, h - 2, cs - 1), (rs + 1, cs + 1, h - 2, w - 2)]
    labels = [ROOM_LABELS[i] for i in rng.permutation(len(ROOM_LABELS))[:4]]
    rooms = [{"id": f"room{i}", "label": labels[i], "rect": list(r)} for i, r in enumerate(rects)]

    near_door = {(d[0] + dr, d[1] + dc) for d in doors for dr in (-1, 0, 1) for dc in (-1, 0, 1)}
    placed = 0
    for _ in range(n_furniture * 10):
        if placed >= n_furniture:
            break
        cell = (int(rng.integers(1, h - 1)), int(rng.integers(1, w - 1)))
        if occ[cell] or cell in near_door:
            continue
        occ[cell] = True
        if _connected(occ):
            placed += 1
        else:
            occ[cell] = False

    free = [tuple(int(v) for v in c) for c in np.argwhere(~occ) if tuple(int(v) for v in c) not in set(doors)]
    free = [c for c in free if any(r0 <= c[0] <= r1 and c0 <= c[1] <= c1 for r0, c0, r1, c1 in rects)]
    order = rng.permutation(len(free))
    robot = free[int(order[0])]
    object_cells = [free[int(i)] for i in order[1 : 1 + n_objects]]
    obj_labels = [OBJECT_LABELS[i] for i in rng.permutation(len(OBJECT_LABELS))[:n_objects]]
    objects = [{"id": f"obj{i}", "label": obj_labels[i], "cell": list(c)} for i, c in enumerate(object_cells)]
    heading = float(rng.choice([0.0, 90.0, 180.0, 270.0]))

    doc = {
        "width": w,
        "height": h,
        "resolution": 0.25,
        "occupied": [[int(r), int(c)] for r, c in np.argwhere(occ)],
        "objects": objects,
        "rooms": rooms,
        "robot": {"cell": list(robot), "heading": heading},
        "seed": int(seed),
    }
    world = load_world(doc)
    target = world.objects[int(rng.integers(0, n_objects))]
    room_index = next(i for i, r in enumerate(world.rooms) if r.id == target.room_id)
    task = Task(
        f"where-{seed}",
        f"Where is the {target.label}?",
        tuple((LETTERS[i], r.label) for i, r in enumerate(world.rooms)),
        LETTERS[room_index],
        f"world-{seed}.json",
    )
    return world.to_dict(), task


def generate(seed: int) -> tuple[GridWorld, Task]:
    doc, task = generate_world(seed)
    return load_world(doc), task
