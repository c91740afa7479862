"""Chat-completions wire client with function calling and bounded retries."""

from __future__ import annotations

import json
import logging
import os
import time
from typing import Any, Sequence

import httpx

from .base import BackendError, BackendReply, ChatTurn, ToolCall, TransportError, Usage

log = logging.getLogger(__name__)

API_KEY_ENV = "AGENTNAV_API_KEY"
ENDPOINT_ENV = "AGENTNAV_ENDPOINT"
DEFAULT_ENDPOINT = "http://127.0.0.1:8000"
CHAT_PATH = "/v1/chat/completions"

# JSON schema of the request body this client sends.
REQUEST_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["model", "messages", "tools", "tool_choice"],
    "additionalProperties": False,
    "properties": {
        "model": {"type": "string", "minLength": 1},
        "tool_choice": {"const": "auto"},
        "messages": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["role", "content"],
                "additionalProperties": False,
                "properties": {
                    "role": {"enum": ["system", "user", "assistant", "tool"]},
                    "content": {"type": ["string", "null"]},
                    "tool_call_id": {"type": "string"},
                    "tool_calls": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "type", "function"],
                            "properties": {
                                "id": {"type": "string"},
                                "type": {"const": "function"},
                                "function": {
                                    "type": "object",
                                    "required": ["name", "arguments"],
                                    "properties": {
                                        "name": {"type": "string"},
                                        "arguments": {"type": "string"},
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
        "tools": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "function"],
                "properties": {
                    "type": {"const": "function"},
                    "function": {
                        "type": "object",
                        "required": ["name", "description", "parameters"],
                        "properties": {
                            "name": {"type": "string"},
                            "description": {"type": "string"},
                            "parameters": {"type": "object"},
                        },
                    },
                },
            },
        },
    },
}


def _wire_tool_call(tc: ToolCall) -> dict[str, Any]:
    return {
        "id": tc.call_id,
        "type": "function",
        "function": {"name": tc.name, "arguments": json.dumps(tc.args, sort_keys=True)},
    }


def build_request(model: str, turns: Sequence[ChatTurn], tools: Sequence[dict]) -> dict[str, Any]:
    messages = []
    for t in turns:
        m: dict[str, Any] = {"role": t.role, "content": t.content}
        if t.tool_calls:
            m["tool_calls"] = [_wire_tool_call(tc) for tc in t.tool_calls]
        if t.tool_call_id:
            m["tool_call_id"] = t.tool_call_id
        messages.append(m)
    return {
        "model": model,
        "messages": messages,
        "tools": [{"type": "function", "function": d} for d in tools],
        "tool_choice": "auto",
    }


def parse_response(body: dict[str, Any]) -> BackendReply:
    try:
        message = body["choices"][0]["message"]
        usage = body.get("usage") or {}
        calls = None
        if message.get("tool_calls"):
            calls = []
            for raw in message["tool_calls"]:
                fn = raw["function"]
                args = fn.get("arguments") or "{}"
                try:
                    parsed = json.loads(args)
                except json.JSONDecodeError:
                    parsed = args  # left for argument validation to reject
                calls.append(ToolCall(fn["name"], parsed, raw.get("id", "")))
        return BackendReply(
            message.get("content"),
            calls,
            Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise BackendError(f"malformed chat-completions response: {exc}") from exc


class RemoteBackend:
    """HTTP client for an OpenAI-compatible ``/v1/chat/completions`` endpoint.

    Connection failures, 429 and 5xx responses are retried ``retries`` times
    with exponential backoff before :class:`TransportError` is raised.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str = "gpt-4o",
        api_key: str | None = None,
        retries: int = 2,
        backoff: float = 0.5,
        timeout: float = 120.0,
    ):
        self.base_url = (base_url or os.environ.get(ENDPOINT_ENV) or DEFAULT_ENDPOINT).rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.retries = retries
        self.backoff = backoff
        self.attempts = 0
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._client.close()

    def complete(self, turns: Sequence[ChatTurn], tools: Sequence[dict] = ()) -> BackendReply:
        if not turns or turns[0].role != "system":
            raise ValueError("first turn must be a system turn")
        body = build_request(self.model, turns, tools)
        url = self.base_url + CHAT_PATH
        last = ""
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            self.attempts += 1
            try:
                resp = self._client.post(url, json=body)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("chat request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("chat request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return parse_response(resp.json())
        raise TransportError(f"retries exhausted after {self.retries + 1} attempts: {last}")
