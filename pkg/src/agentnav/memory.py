"""Agent memory: editable text sections, landmarks, and an append-only action log.

The backend edits everything except the action log through a small JSON op
language; the log is written only by the runtime.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

from .geometry import Cell
from .llmlink.base import ChatTurn
from .mapping import LandmarkOverflow, OccupancyGrid, render_raster
from .prompts import system_prompt

SECTIONS = ("spatial_description", "findings", "progress")
LOG_KINDS = ("tool_call", "nav", "memory_update", "workflow_event")
LANDMARK_SOURCES = ("queried_object", "sampled_room_point", "sampled_image_point")
RENDER_LOG_LINES = 20
OBS_SUMMARY_LIMIT = 8


class EditError(ValueError):
    """A memory edit that cannot be applied; the memory is left untouched."""


@dataclass(frozen=True)
class Landmark:
    name: str
    cell: Cell
    source: str = "queried_object"


@dataclass(frozen=True)
class LogEntry:
    step: int
    kind: str
    summary: str
    tokens: int = 0


@dataclass
class AgentMemory:
    task_text: str
    sections: dict[str, str] = field(default_factory=lambda: {s: "" for s in SECTIONS})
    landmarks: list[Landmark] = field(default_factory=list)
    action_log: list[LogEntry] = field(default_factory=list)
    step_counter: int = 0
    answer: str | None = None

    def log(self, kind: str, summary: str, tokens: int = 0) -> LogEntry:
        if kind not in LOG_KINDS:
            raise ValueError(f"unknown log kind {kind!r}")
        self.step_counter += 1
        entry = LogEntry(self.step_counter, kind, summary, tokens)
        self.action_log.append(entry)
        return entry

    def landmark(self, name: str) -> Landmark | None:
        key = _lm_key(name)
        return next((lm for lm in self.landmarks if _lm_key(lm.name) == key), None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task_text,
            "sections": dict(self.sections),
            "landmarks": [[lm.name, list(lm.cell), lm.source] for lm in self.landmarks],
            "action_log": [[e.step, e.kind, e.summary, e.tokens] for e in self.action_log],
            "answer": self.answer,
        }


def _lm_key(name: str) -> str:
    return " ".join(name.lower().replace("_", " ").split())


def init_memory(task: str) -> AgentMemory:
    return AgentMemory(task)


def parse_edit(text: str | None) -> list[dict[str, Any]]:
    """Decode a reply into a list of op objects (the first JSON array found)."""
    if not text:
        raise EditError("empty reply")
    start, end = text.find("["), text.rfind("]")
    if start < 0 or end < start:
        raise EditError("no JSON array in reply")
    try:
        ops = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise EditError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(ops, list) or not all(isinstance(o, dict) for o in ops):
        raise EditError("edit must be an array of objects")
    return ops


def _str_field(op: dict[str, Any], key: str) -> str:
    v = op.get(key)
    if not isinstance(v, str):
        raise EditError(f"{op.get('op')}: {key} must be a string")
    return v


def apply_edit(
    memory: AgentMemory,
    ops: list[dict[str, Any]],
    bounds: tuple[int, int] | None = None,
    regions: dict[str, tuple[int, int, int, int]] | None = None,
) -> None:
    """Apply all ops or none."""
    sections = dict(memory.sections)
    landmarks = list(memory.landmarks)

    def put_landmark(lm: Landmark) -> None:
        if bounds is not None and not (0 <= lm.cell[0] < bounds[0] and 0 <= lm.cell[1] < bounds[1]):
            raise EditError(f"landmark {lm.name!r} cell {list(lm.cell)} out of bounds")
        for i, old in enumerate(landmarks):
            if _lm_key(old.name) == _lm_key(lm.name):
                landmarks[i] = lm
                return
        landmarks.append(lm)

    for op in ops:
        kind = op.get("op")
        if kind == "set_section":
            name = _str_field(op, "name")
            if name not in SECTIONS:
                raise EditError(f"set_section: {name!r} is not an editable section")
            sections[name] = _str_field(op, "text")
        elif kind == "add_finding":
            text = _str_field(op, "text")
            sections["findings"] = f"{sections['findings']}\n- {text}" if sections["findings"] else f"- {text}"
        elif kind == "add_landmark":
            name = _str_field(op, "name").strip()
            cell = op.get("cell")
            if not (
                isinstance(cell, list)
                and len(cell) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) for v in cell)
            ):
                raise EditError("add_landmark: cell must be [row, col]")
            source = op.get("source", "queried_object")
            if source not in LANDMARK_SOURCES:
                raise EditError(f"add_landmark: unknown source {source!r}")
            if not name:
                raise EditError("add_landmark: empty name")
            put_landmark(Landmark(name, (cell[0], cell[1]), source))
        elif kind == "remove_landmark":
            key = _lm_key(_str_field(op, "name"))
            kept = [lm for lm in landmarks if _lm_key(lm.name) != key]
            if len(kept) == len(landmarks):
                raise EditError(f"remove_landmark: no landmark {op['name']!r}")
            landmarks = kept
        elif kind == "sample_room_point":
            name = _str_field(op, "name").strip()
            room = _str_field(op, "room")
            rect = _find_region(regions or {}, room)
            if rect is None:
                raise EditError(f"sample_room_point: unknown room {room!r}")
            cell = ((rect[0] + rect[2]) // 2, (rect[1] + rect[3]) // 2)
            put_landmark(Landmark(name or room, cell, "sampled_room_point"))
        else:
            raise EditError(f"unknown op {kind!r}")
    memory.sections = sections
    memory.landmarks = landmarks


def _find_region(regions: dict[str, tuple[int, int, int, int]], room: str):
    key = _lm_key(room)
    for name, rect in regions.items():
        if _lm_key(name) == key:
            return rect
    return None


def summarize_observations(obs_seq: Sequence[Any], limit: int = OBS_SUMMARY_LIMIT, detections_only=False) -> str:
    """At most ``limit`` observations, evenly spaced, always keeping first and last."""
    n = len(obs_seq)
    if n == 0:
        return "observations: none"
    if n <= limit:
        idx = list(range(n))
    else:
        idx = sorted({round(i * (n - 1) / (limit - 1)) for i in range(limit)})
    parts = [f"observations: {n} total, showing {len(idx)}"]
    for i in idx:
        o = obs_seq[i]
        parts.append(o.detection_text() if detections_only else o.rendered_view)
    return "\n".join(parts)


def render(
    memory: AgentMemory,
    grid: OccupancyGrid | None,
    robot: Cell | None,
    *,
    include_raster: bool = True,
    log_lines: int = RENDER_LOG_LINES,
) -> str:
    """Prompt view of the memory; identical inputs give identical text."""
    parts = [f"# task\n{memory.task_text}"]
    for name in SECTIONS:
        # "| " prefix keeps section text from impersonating headers or the empty marker
        body = "\n".join(f"| {line}" for line in memory.sections[name].split("\n"))
        parts.append(f"# {name.replace('_', ' ')}\n{body if memory.sections[name] else '(empty)'}")
    parts.append(f"# committed answer\n{memory.answer or '(none)'}")
    if include_raster and grid is not None:
        try:
            raster = render_raster(grid, memory.landmarks, robot)
        except LandmarkOverflow as exc:
            raster = f"raster unavailable: {exc}; remove landmarks to restore it"
        parts.append(f"# occupancy grid\n{raster}")
    elif memory.landmarks:
        parts.append(
            "# landmarks\n" + "\n".join(f"{lm.name} ({lm.cell[0]},{lm.cell[1]})" for lm in memory.landmarks)
        )
    tail = memory.action_log[-log_lines:] if log_lines > 0 else []
    lines = [f"[{e.step:04d}] {e.kind}: {e.summary}" for e in tail]
    parts.append(f"# action log (last {len(tail)} of {len(memory.action_log)})\n" + ("\n".join(lines) or "(empty)"))
    return "\n".join(parts)


def apply_update(
    memory: AgentMemory,
    backend,
    result: str | Sequence[Any],
    *,
    grid: OccupancyGrid | None = None,
    robot: Cell | None = None,
    include_raster: bool = True,
    detections_only: bool = False,
    regions: dict[str, tuple[int, int, int, int]] | None = None,
    note: str = "",
) -> AgentMemory:
    """Ask the backend for a memory edit describing ``result`` and apply it.

    ``result`` is a step result text or an observation sequence. Exactly one
    ``memory_update`` log entry is appended whether or not the edit applies.
    """
    if isinstance(result, str):
        text = result
    else:
        text = summarize_observations(result, detections_only=detections_only)
    if note:
        text = f"{note}\n{text}"
    view = render(memory, grid, robot, include_raster=include_raster)
    turns = [
        ChatTurn("system", system_prompt("memory_update")),
        ChatTurn("user", f"{view}\n\n# result\n{text}"),
    ]
    reply = backend.complete(turns, [])
    bounds = grid.shape if grid is not None else None
    try:
        ops = parse_edit(reply.text)
        apply_edit(memory, ops, bounds, regions)
    except EditError as exc:
        memory.log("memory_update", f"edit rejected: {exc}", reply.usage.total)
    else:
        memory.log("memory_update", f"applied {len(ops)} op(s)", reply.usage.total)
    return memory
