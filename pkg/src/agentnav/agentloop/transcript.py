"""Ordered episode event log; its JSON-lines dump doubles as replay input."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

EVENT_KINDS = (
    "episode_start",
    "backend",
    "workflow",
    "observation",
    "termination_check",
    "select",
    "dispatch",
    "step_result",
    "memory_update",
    "nav_start",
    "move",
    "nav_end",
    "workflow_event",
    "outcome",
)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class Recorder:
    events: list[dict[str, Any]] = field(default_factory=list)
    step_source: Any = None  # callable returning the current reasoning-step count

    def emit(self, kind: str, payload: dict[str, Any], tokens: int = 0) -> dict[str, Any]:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        step = self.step_source() if self.step_source is not None else 0
        event = {"kind": kind, "step": step, "payload": payload, "tokens": tokens}
        self.events.append(event)
        return event

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e["kind"] == kind)


def dumps_jsonl(events: Iterable[dict[str, Any]]) -> str:
    return "".join(canonical_json(e) + "\n" for e in events)


def loads_jsonl(text: str) -> list[dict[str, Any]]:
    out = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"transcript line {i}: {exc.msg}") from None
        if not isinstance(event, dict) or event.get("kind") not in EVENT_KINDS:
            raise ValueError(f"transcript line {i}: not an event")
        out.append(event)
    return out
