"""Multiple-choice navigation tasks and the task-file format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

TASK_FORMAT = 1

TASK_FILE_SCHEMA: dict[str, Any] = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["format", "id", "question", "choices", "answer_key", "world"],
        "properties": {
            "format": {"const": TASK_FORMAT},
            "id": {"type": "string", "minLength": 1},
            "question": {"type": "string", "minLength": 1},
            "choices": {
                "type": "array",
                "minItems": 2,
                "items": {
                    "type": "object",
                    "required": ["letter", "text"],
                    "properties": {
                        "letter": {"type": "string", "pattern": "^[A-Z]$"},
                        "text": {"type": "string"},
                    },
                },
            },
            "answer_key": {"type": "string", "pattern": "^[A-Z]$"},
            "world": {"type": "string", "minLength": 1},
        },
    },
}


class TaskFileError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    question: str
    choices: tuple[tuple[str, str], ...]
    answer_key: str
    world_ref: str = ""

    def __post_init__(self) -> None:
        letters = [c[0] for c in self.choices]
        if len(self.choices) < 2:
            raise TaskFileError(f"task {self.id}: at least two choices required")
        if len(set(letters)) != len(letters):
            raise TaskFileError(f"task {self.id}: duplicate choice letters")
        if self.answer_key not in letters:
            raise TaskFileError(f"task {self.id}: answer_key {self.answer_key!r} is not a choice")

    def prompt_text(self) -> str:
        lines = [self.question, "choices:"] + [f"{letter}) {text}" for letter, text in self.choices]
        return "\n".join(lines)

    def normalize_answer(self, raw: str) -> str:
        """Map a reply to a choice letter when possible, else return it stripped."""
        s = raw.strip()
        m = re.fullmatch(r"\(?([A-Za-z])\)?[.)]?", s)
        if m and m.group(1).upper() in {c[0] for c in self.choices}:
            return m.group(1).upper()
        for letter, text in self.choices:
            if s.lower() == text.strip().lower():
                return letter
        return s

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": TASK_FORMAT,
            "id": self.id,
            "question": self.question,
            "choices": [{"letter": l, "text": t} for l, t in self.choices],
            "answer_key": self.answer_key,
            "world": self.world_ref,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Task":
        return cls(
            d["id"],
            d["question"],
            tuple((c["letter"], c["text"]) for c in d["choices"]),
            d["answer_key"],
            d.get("world", ""),
        )


def load_tasks(document: str) -> list[Task]:
    import jsonschema

    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TaskFileError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        jsonschema.validate(raw, TASK_FILE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise TaskFileError(f"{where}: {exc.message}") from None
    tasks = [Task.from_dict(d) for d in raw]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise TaskFileError("duplicate task ids")
    return tasks


def dump_tasks(tasks: list[Task]) -> str:
    return json.dumps([t.to_dict() for t in tasks], indent=2) + "\n"
