"""Backend contract and its three implementations (remote, scripted, oracle)."""

from .base import (
    Backend,
    BackendError,
    BackendReply,
    Budgets,
    ChatTurn,
    ToolCall,
    TranscriptExhausted,
    TranscriptMismatch,
    TransportError,
    Usage,
    UsageLedger,
    over_budget,
    prompt_hash,
    record_usage,
    request_tag,
)
from .oracle import OracleBackend
from .remote import RemoteBackend
from .scripted import ScriptedBackend

__all__ = [
    "Backend",
    "BackendError",
    "BackendReply",
    "Budgets",
    "ChatTurn",
    "OracleBackend",
    "RemoteBackend",
    "ScriptedBackend",
    "ToolCall",
    "TranscriptExhausted",
    "TranscriptMismatch",
    "TransportError",
    "Usage",
    "UsageLedger",
    "over_budget",
    "prompt_hash",
    "record_usage",
    "request_tag",
]
