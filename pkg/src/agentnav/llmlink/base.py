"""Backend contract: chat turns, replies, usage accounting, prompt hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Protocol, Sequence

ROLES = ("system", "user", "assistant", "tool")


class BackendError(Exception):
    """Base for backend failures that are not budget interrupts."""


class TransportError(BackendError):
    pass


class TranscriptExhausted(BackendError):
    pass


class TranscriptMismatch(BackendError):
    pass


@dataclass
class ToolCall:
    name: str
    args: Any
    call_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "args": self.args, "call_id": self.call_id}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToolCall":
        return cls(d["name"], d.get("args", {}), d.get("call_id", ""))


@dataclass
class ChatTurn:
    role: str
    content: str
    tool_calls: list[ToolCall] | None = None
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("tool turns require tool_call_id")


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("usage must be non-negative")

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict[str, int]:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}


@dataclass
class BackendReply:
    text: str | None = None
    tool_calls: list[ToolCall] | None = None
    usage: Usage = field(default_factory=Usage)

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "tool_calls": [tc.to_dict() for tc in self.tool_calls] if self.tool_calls else None,
            "usage": self.usage.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BackendReply":
        calls = d.get("tool_calls")
        return cls(
            d.get("text"),
            [ToolCall.from_dict(c) for c in calls] if calls else None,
            Usage(**d.get("usage", {})),
        )


class Backend(Protocol):
    def complete(self, turns: Sequence[ChatTurn], tools: Sequence[dict] = ()) -> BackendReply: ...


def request_tag(turns: Sequence[ChatTurn]) -> str:
    """The ``request:`` line of the system turn, naming what is being asked."""
    if turns and turns[0].role == "system":
        first = turns[0].content.split("\n", 1)[0]
        if first.startswith("request: "):
            return first[len("request: ") :].strip()
    return "unknown"


def canonical_prompt(turns: Sequence[ChatTurn], tools: Sequence[dict] = ()) -> str:
    """Sorted-key JSON of the exchange with whitespace collapsed in every content."""
    msgs = []
    for t in turns:
        m: dict[str, Any] = {"role": t.role, "content": " ".join(t.content.split())}
        if t.tool_calls:
            m["tool_calls"] = [c.to_dict() for c in t.tool_calls]
        if t.tool_call_id:
            m["tool_call_id"] = t.tool_call_id
        msgs.append(m)
    return json.dumps({"messages": msgs, "tools": list(tools)}, sort_keys=True, separators=(",", ":"))


def prompt_hash(turns: Sequence[ChatTurn], tools: Sequence[dict] = ()) -> str:
    return hashlib.sha256(canonical_prompt(turns, tools).encode("utf-8")).hexdigest()


def approx_tokens(text: str) -> int:
    """Whitespace-token count; reported as approximate."""
    return len(text.split())


def approx_usage(turns: Sequence[ChatTurn], tools: Sequence[dict], reply_text: str) -> Usage:
    prompt = sum(approx_tokens(t.content) for t in turns)
    if tools:
        prompt += approx_tokens(json.dumps(list(tools), sort_keys=True))
    return Usage(prompt, approx_tokens(reply_text))


@dataclass(frozen=True)
class Budgets:
    max_reasoning_steps: int = 500
    max_cost: Decimal = Decimal("5.00")
    rate_in_per_1k: Decimal = Decimal("0.0025")
    rate_out_per_1k: Decimal = Decimal("0.01")

    def __post_init__(self) -> None:
        for name in ("max_cost", "rate_in_per_1k", "rate_out_per_1k"):
            object.__setattr__(self, name, Decimal(str(getattr(self, name))))
        if self.max_reasoning_steps <= 0 or self.max_cost <= 0:
            raise ValueError("budgets must be positive")
        if self.rate_in_per_1k < 0 or self.rate_out_per_1k < 0:
            raise ValueError("cost rates must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_reasoning_steps": self.max_reasoning_steps,
            "max_cost": str(self.max_cost),
            "rate_in_per_1k": str(self.rate_in_per_1k),
            "rate_out_per_1k": str(self.rate_out_per_1k),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Budgets":
        return cls(
            int(d["max_reasoning_steps"]),
            Decimal(d["max_cost"]),
            Decimal(d["rate_in_per_1k"]),
            Decimal(d["rate_out_per_1k"]),
        )


@dataclass
class UsageLedger:
    rate_in_per_1k: Decimal = Decimal("0.0025")
    rate_out_per_1k: Decimal = Decimal("0.01")
    prompt_tokens: int = 0
    completion_tokens: int = 0
    calls: int = 0

    @classmethod
    def for_budgets(cls, budgets: Budgets) -> "UsageLedger":
        return cls(budgets.rate_in_per_1k, budgets.rate_out_per_1k)

    @property
    def cost(self) -> Decimal:
        return (
            Decimal(self.prompt_tokens) * self.rate_in_per_1k + Decimal(self.completion_tokens) * self.rate_out_per_1k
        ) / 1000

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def record_usage(ledger: UsageLedger, usage: Usage) -> UsageLedger:
    ledger.prompt_tokens += usage.prompt_tokens
    ledger.completion_tokens += usage.completion_tokens
    ledger.calls += 1
    return ledger


def over_budget(ledger: UsageLedger, budgets: Budgets) -> bool:
    return ledger.cost > budgets.max_cost
