"""Tool registry: schemas, argument validation, dispatch, wire descriptions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .errors import EpisodeInterrupt
from .geometry import Cell
from .llmlink.base import ToolCall

log = logging.getLogger(__name__)

WIRE_TYPES = ("string", "number", "integer", "boolean", "cell", "label-list")
CATEGORIES = ("perception", "reasoning", "navigation")
GEN_PREFIX = "gen_"

__all__ = [
    "Param",
    "ToolSchema",
    "ToolCall",
    "ToolOutput",
    "ToolResult",
    "NavGoal",
    "Status",
    "ToolRegistry",
    "validate",
    "describe",
    "schema_from_wire",
]


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    doc: str
    required: bool = True

    def __post_init__(self) -> None:
        if self.type not in WIRE_TYPES:
            raise ValueError(f"unknown wire type {self.type!r}")
        if not self.doc.strip():
            raise ValueError(f"param {self.name!r} is undocumented")


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    params: tuple[Param, ...] = ()
    returns: str = "text"
    category: str = "reasoning"

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.description.strip():
            raise ValueError(f"tool {self.name!r} is undocumented")

    def param_names(self) -> list[str]:
        return [p.name for p in self.params]


@dataclass(frozen=True)
class NavGoal:
    cell: Cell
    explore: bool = False  # frontier goals get a look-around on arrival

    def to_dict(self) -> dict[str, Any]:
        return {"cell": list(self.cell), "explore": self.explore}


class Status(str, Enum):
    OK = "ok"
    ARG_ERROR = "arg_error"
    RUNTIME_ERROR = "runtime_error"


@dataclass
class ToolOutput:
    """What a handler returns; dispatch wraps it into a :class:`ToolResult`."""

    text: str
    value: Any = None
    nav_goal: NavGoal | None = None


@dataclass
class ToolResult:
    call_id: str
    name: str
    status: Status
    text: str
    value: Any = None
    nav_goal: NavGoal | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OK

    def render(self) -> str:
        return f"{self.name} [{self.status.value}]: {self.text}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "call_id": self.call_id,
            "name": self.name,
            "status": self.status.value,
            "text": self.text,
            "nav_goal": self.nav_goal.to_dict() if self.nav_goal else None,
        }


def _is_int(v: Any) -> bool:
    if isinstance(v, bool):
        return False
    if isinstance(v, int):
        return True
    return isinstance(v, float) and math.isfinite(v) and v.is_integer()


def _check_type(wire: str, v: Any, bounds: tuple[int, int] | None) -> str | None:
    if wire == "string":
        return None if isinstance(v, str) else "expected string"
    if wire == "boolean":
        return None if isinstance(v, bool) else "expected boolean"
    if wire == "integer":
        return None if _is_int(v) else "expected integer"
    if wire == "number":
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
        return None if ok else "expected number"
    if wire == "label-list":
        ok = isinstance(v, (list, tuple)) and all(isinstance(x, str) for x in v)
        return None if ok else "expected list of strings"
    # cell
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_int(x) for x in v)):
        return "expected [row, col] integer pair"
    if bounds is not None and not (0 <= v[0] < bounds[0] and 0 <= v[1] < bounds[1]):
        return f"cell {list(v)} out of bounds"
    return None


def validate(schema: ToolSchema, args: Any, bounds: tuple[int, int] | None = None) -> list[str]:
    """Violations of ``args`` against ``schema``; an empty list means valid."""
    if not isinstance(args, dict):
        return ["arguments must be an object"]
    out = []
    known = set(schema.param_names())
    for p in schema.params:
        if p.name not in args:
            if p.required:
                out.append(f"missing required param {p.name}")
            continue
        err = _check_type(p.type, args[p.name], bounds)
        if err:
            out.append(f"{p.name}: {err}")
    for name in args:
        if name not in known:
            out.append(f"unknown param {name}")
    return out


def _coerce(schema: ToolSchema, args: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for p in schema.params:
        if p.name not in args:
            continue
        v = args[p.name]
        if p.type == "integer":
            v = int(v)
        elif p.type == "number":
            v = float(v)
        elif p.type == "cell":
            v = (int(v[0]), int(v[1]))
        elif p.type == "label-list":
            v = list(v)
        out[p.name] = v
    return out


_JSON_TYPES = {
    "string": {"type": "string"},
    "number": {"type": "number"},
    "integer": {"type": "integer"},
    "boolean": {"type": "boolean"},
    "cell": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
    "label-list": {"type": "array", "items": {"type": "string"}},
}


def describe(schema: ToolSchema) -> dict[str, Any]:
    """Function-calling description: ``{name, description, parameters}``."""
    props = {}
    for p in schema.params:
        props[p.name] = dict(_JSON_TYPES[p.type], description=p.doc)
    desc = f"{schema.description} Returns: {schema.returns}. Category: {schema.category}."
    return {
        "name": schema.name,
        "description": desc,
        "parameters": {
            "type": "object",
            "properties": props,
            "required": [p.name for p in schema.params if p.required],
            "additionalProperties": False,
        },
    }


def _wire_type(prop: dict[str, Any]) -> str:
    t = prop.get("type")
    if t == "array":
        return "cell" if prop.get("items", {}).get("type") == "integer" else "label-list"
    if t in ("string", "number", "integer", "boolean"):
        return t
    raise ValueError(f"unsupported parameter type {t!r}")


def schema_from_wire(d: dict[str, Any]) -> ToolSchema:
    """Inverse of :func:`describe`."""
    desc = d["description"]
    head, _, tail = desc.rpartition(" Returns: ")
    returns, _, category = tail.rpartition(". Category: ")
    params = d["parameters"]
    required = set(params.get("required", []))
    ps = tuple(
        Param(name, _wire_type(prop), prop.get("description", ""), name in required)
        for name, prop in params.get("properties", {}).items()
    )
    return ToolSchema(d["name"], head, ps, returns, category.rstrip("."))


Handler = Callable[[Any, dict[str, Any]], ToolOutput]


@dataclass
class _Entry:
    schema: ToolSchema
    handler: Handler


@dataclass
class ToolRegistry:
    """Ordered tool registry.

    ``disabled`` names are tools known to the system but removed for this
    run (ablations); dispatching them is an unknown-tool error.
    """

    _tools: dict[str, _Entry] = field(default_factory=dict)
    disabled: set[str] = field(default_factory=set)
    dispatch_count: int = 0

    def register(self, schema: ToolSchema, handler: Handler) -> None:
        if schema.name in self._tools:
            raise ValueError(f"duplicate tool {schema.name!r}")
        self._tools[schema.name] = _Entry(schema, handler)

    def unregister(self, name: str) -> None:
        del self._tools[name]
        self.disabled.add(name)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def names(self) -> list[str]:
        return list(self._tools)

    def known(self, name: str) -> bool:
        return name in self._tools or name in self.disabled

    def schema(self, name: str) -> ToolSchema:
        return self._tools[name].schema

    def describe_all(self) -> list[dict[str, Any]]:
        return [describe(e.schema) for e in self._tools.values()]

    def dispatch(self, call: ToolCall, ctx: Any) -> ToolResult:
        """Run a tool call; every failure mode comes back as a ToolResult.

        One action-log entry is appended per dispatch when ``ctx`` carries a
        memory. Episode interrupts (budget breaches) pass through.
        """
        self.dispatch_count += 1
        result = self._dispatch(call, ctx)
        memory = getattr(ctx, "memory", None)
        if memory is not None:
            memory.log("tool_call", f"{call.name} -> {result.status.value}: {_clip(result.text)}")
        return result

    def _dispatch(self, call: ToolCall, ctx: Any) -> ToolResult:
        entry = self._tools.get(call.name)
        if entry is None:
            return ToolResult(call.call_id, call.name, Status.ARG_ERROR, "unknown tool")
        violations = validate(entry.schema, call.args, getattr(ctx, "bounds", None))
        if violations:
            return ToolResult(
                call.call_id, call.name, Status.ARG_ERROR, f"invalid arguments: {'; '.join(violations)}"
            )
        try:
            out = entry.handler(ctx, _coerce(entry.schema, call.args))
        except EpisodeInterrupt:
            raise
        except Exception as exc:  # handler faults become results, never crashes
            log.debug("tool %s failed", call.name, exc_info=True)
            return ToolResult(call.call_id, call.name, Status.RUNTIME_ERROR, f"{type(exc).__name__}: {exc}")
        if out.nav_goal is not None and entry.schema.category != "navigation":
            return ToolResult(
                call.call_id, call.name, Status.RUNTIME_ERROR, "navigation goal from non-navigation tool"
            )
        return ToolResult(call.call_id, call.name, Status.OK, out.text, out.value, out.nav_goal)


def _clip(text: str, n: int = 160) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= n else flat[: n - 3] + "..."
