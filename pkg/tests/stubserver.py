"""A local chat-completions stub on top of the standard library HTTP server.

It validates every request body against the client's documented schema,
records it, and answers from a queue: an int entry is an injected HTTP
status, a dict is a full response body. An empty queue echoes the last user
message, or, when the request carries tools, calls the first tool.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import jsonschema

from agentnav.llmlink.remote import CHAT_PATH, REQUEST_SCHEMA


def chat_body(content=None, tool_calls=None, prompt_tokens=10, completion_tokens=5) -> dict:
    msg: dict = {"role": "assistant", "content": content}
    if tool_calls:
        msg["tool_calls"] = tool_calls
    return {
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": msg, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


class StubServer:
    def __init__(self):
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.schema_errors: list[str] = []
        self.queue: list = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(n)
                if self.path != CHAT_PATH:
                    self._send(404, {"error": "not found"})
                    return
                body = json.loads(raw)
                with stub._lock:
                    stub.requests.append(body)
                    stub.headers.append(dict(self.headers))
                    try:
                        jsonschema.validate(body, REQUEST_SCHEMA)
                    except jsonschema.ValidationError as exc:
                        stub.schema_errors.append(exc.message)
                    item = stub.queue.pop(0) if stub.queue else None
                if isinstance(item, int):
                    self._send(item, {"error": "injected"})
                    return
                self._send(200, item if item is not None else stub.default_reply(body))

            def _send(self, code, obj):
                data = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    @staticmethod
    def default_reply(body: dict) -> dict:
        if body.get("tools"):
            fn = body["tools"][0]["function"]
            call = {"id": "call_1", "type": "function", "function": {"name": fn["name"], "arguments": "{}"}}
            return chat_body(None, [call])
        last = body["messages"][-1]["content"] or ""
        return chat_body(f"echo: {last}")

    def __enter__(self) -> "StubServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
