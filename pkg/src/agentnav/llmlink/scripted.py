"""Replay backend: serves recorded replies in order, checking prompt hashes."""

from __future__ import annotations

import threading
from typing import Any, Iterable, Sequence

from .base import (
    BackendReply,
    ChatTurn,
    TranscriptExhausted,
    TranscriptMismatch,
    approx_usage,
    prompt_hash,
)


class ScriptedBackend:
    """Returns the next recorded entry for every ``complete`` call.

    Entries are dicts with a ``reply`` (see :meth:`BackendReply.to_dict`) and
    optionally a ``prompt_hash``; when present and ``check_hashes`` is on, a
    differing prompt raises :class:`TranscriptMismatch`. Entries without usage
    get the whitespace approximation.
    """

    def __init__(self, entries: Iterable[dict[str, Any]], check_hashes: bool = True):
        self.entries = list(entries)
        self.check_hashes = check_hashes
        self.position = 0
        self._lock = threading.Lock()

    @classmethod
    def from_replies(cls, replies: Iterable[str | dict[str, Any]]) -> "ScriptedBackend":
        entries = []
        for r in replies:
            entries.append({"reply": {"text": r}} if isinstance(r, str) else {"reply": r})
        return cls(entries, check_hashes=False)

    @classmethod
    def from_transcript(cls, events: Iterable[dict[str, Any]]) -> "ScriptedBackend":
        entries = [
            {"prompt_hash": e["payload"]["prompt_hash"], "reply": e["payload"]["reply"]}
            for e in events
            if e["kind"] == "backend"
        ]
        return cls(entries)

    @property
    def remaining(self) -> int:
        return len(self.entries) - self.position

    def complete(self, turns: Sequence[ChatTurn], tools: Sequence[dict] = ()) -> BackendReply:
        if not turns or turns[0].role != "system":
            raise ValueError("first turn must be a system turn")
        with self._lock:
            i = self.position
            if i >= len(self.entries):
                raise TranscriptExhausted(f"transcript exhausted at turn {i}")
            entry = self.entries[i]
            expected = entry.get("prompt_hash")
            if self.check_hashes and expected:
                actual = prompt_hash(turns, tools)
                if actual != expected:
                    raise TranscriptMismatch(
                        f"turn {i}: prompt hash mismatch (expected {expected[:12]}, got {actual[:12]})"
                    )
            self.position += 1
        raw = dict(entry["reply"])
        reply = BackendReply.from_dict(raw)
        if "usage" not in raw:
            reply.usage = approx_usage(turns, tools, reply.text or "")
        return reply
