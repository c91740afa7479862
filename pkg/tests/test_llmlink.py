from __future__ import annotations

from decimal import Decimal

import jsonschema
import pytest

from agentnav.llmlink import (
    BackendError,
    Budgets,
    ChatTurn,
    OracleBackend,
    RemoteBackend,
    ScriptedBackend,
    ToolCall,
    TranscriptExhausted,
    TranscriptMismatch,
    TransportError,
    Usage,
    UsageLedger,
    over_budget,
    prompt_hash,
    record_usage,
)
from agentnav.llmlink.oracle import pick_frontier
from agentnav.llmlink.remote import API_KEY_ENV, REQUEST_SCHEMA, build_request, parse_response
from agentnav.stdtools import standard_registry
from stubserver import StubServer, chat_body

TURNS = [ChatTurn("system", "request: test\nbe brief"), ChatTurn("user", "hello")]


def test_cost_arithmetic():
    ledger = record_usage(UsageLedger(), Usage(1000, 500))
    assert ledger.cost == Decimal("0.0075")
    assert ledger.calls == 1 and ledger.total_tokens == 1500


def test_over_budget_is_strict():
    b = Budgets(max_cost=Decimal("0.0075"))
    ledger = record_usage(UsageLedger.for_budgets(b), Usage(1000, 500))
    assert not over_budget(ledger, b)
    record_usage(ledger, Usage(1, 0))
    assert over_budget(ledger, b)


def test_budget_validation():
    with pytest.raises(ValueError):
        Budgets(max_reasoning_steps=0)
    with pytest.raises(ValueError):
        Budgets(max_cost=Decimal("0"))
    assert Budgets.from_dict(Budgets().to_dict()) == Budgets()


def test_turn_validation():
    with pytest.raises(ValueError):
        ChatTurn("robot", "x")
    with pytest.raises(ValueError):
        ChatTurn("tool", "x")


def test_prompt_hash_ignores_whitespace_only():
    a = [ChatTurn("system", "request: x"), ChatTurn("user", "a  b\n c")]
    b = [ChatTurn("system", "request: x"), ChatTurn("user", "a b c")]
    c = [ChatTurn("system", "request: x"), ChatTurn("user", "a b d")]
    assert prompt_hash(a) == prompt_hash(b) != prompt_hash(c)


def test_scripted_replay_and_mismatch():
    entry = {
        "prompt_hash": prompt_hash(TURNS),
        "reply": {"text": "hi", "usage": {"prompt_tokens": 7, "completion_tokens": 1}},
    }
    b = ScriptedBackend([entry, entry])
    r = b.complete(TURNS)
    assert r.text == "hi" and r.usage == Usage(7, 1)
    other = [TURNS[0], ChatTurn("user", "goodbye")]
    with pytest.raises(TranscriptMismatch, match="turn 1"):
        b.complete(other)
    with pytest.raises(TranscriptExhausted):
        ScriptedBackend([]).complete(TURNS)


def test_scripted_approximates_missing_usage():
    r = ScriptedBackend.from_replies(["one two three"]).complete(TURNS)
    assert r.usage == Usage(prompt_tokens=5, completion_tokens=3)


def test_oracle_forced_single_frontier():
    assert pick_frontier("0: centroid (1,1), size 4, path 0.50 m, nearest landmark none") == 0


def test_oracle_prefers_gain_per_distance():
    prompt = (
        "0: centroid (1,1), size 9, path 3.00 m, nearest landmark none\n"
        "1: centroid (2,2), size 3, path 0.25 m, nearest landmark none\n"
        "2: centroid (3,3), size 9, path unreachable, nearest landmark none"
    )
    assert pick_frontier(prompt) == 1


def test_oracle_is_deterministic():
    turns = [ChatTurn("system", "request: plan.stage4"), ChatTurn("user", "task: Where is the mug?\nA) kitchen")]
    a = OracleBackend().complete(turns)
    b = OracleBackend().complete(turns)
    assert a.to_dict() == b.to_dict() and a.text


def test_request_schema_and_tool_calls():
    tools = standard_registry().describe_all()
    turns = TURNS + [
        ChatTurn("assistant", "", [ToolCall("rotate", {"theta": 90}, "c1")]),
        ChatTurn("tool", "heading 90", tool_call_id="c1"),
    ]
    body = build_request("m", turns, tools)
    jsonschema.validate(body, REQUEST_SCHEMA)
    assert body["messages"][2]["tool_calls"][0]["function"]["arguments"] == '{"theta": 90}'


def test_parse_response():
    call = {"id": "x", "type": "function", "function": {"name": "goto", "arguments": '{"x": 1, "y": 2, "z": 0}'}}
    r = parse_response(chat_body(None, [call], 3, 4))
    assert r.tool_calls == [ToolCall("goto", {"x": 1, "y": 2, "z": 0}, "x")]
    assert r.usage == Usage(3, 4)
    bad = {"id": "y", "type": "function", "function": {"name": "goto", "arguments": "{oops"}}
    assert parse_response(chat_body(None, [bad])).tool_calls[0].args == "{oops"
    with pytest.raises(BackendError, match="malformed"):
        parse_response({"choices": []})


@pytest.fixture
def stub():
    with StubServer() as s:
        yield s


def test_remote_round_trip(stub, monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sk-test")
    tools = standard_registry().describe_all()
    b = RemoteBackend(stub.url, model="stub-model", backoff=0.0)
    for i in range(10):
        r = b.complete(TURNS, tools if i % 2 else [])
        if i % 2:
            assert r.tool_calls == [ToolCall("get_images", {}, "call_1")]
        else:
            assert r.text == "echo: hello" and r.usage == Usage(10, 5)
    b.close()
    assert len(stub.requests) == 10 and stub.schema_errors == []
    assert stub.headers[0]["Authorization"] == "Bearer sk-test"


def test_remote_retries_then_succeeds(stub):
    stub.queue = [503, 429]
    b = RemoteBackend(stub.url, backoff=0.0)
    assert b.complete(TURNS).text == "echo: hello"
    assert b.attempts == 3


def test_remote_retries_exactly_twice_then_fails(stub):
    stub.queue = [500, 502, 503, 200]
    b = RemoteBackend(stub.url, backoff=0.0)
    with pytest.raises(TransportError, match="after 3 attempts"):
        b.complete(TURNS)
    assert len(stub.requests) == 3 and b.attempts == 3


def test_remote_client_error_is_not_retried(stub):
    stub.queue = [400]
    b = RemoteBackend(stub.url, backoff=0.0)
    with pytest.raises(BackendError, match="HTTP 400"):
        b.complete(TURNS)
    assert len(stub.requests) == 1


def test_remote_connection_refused():
    b = RemoteBackend("http://127.0.0.1:9", backoff=0.0, timeout=1.0)
    with pytest.raises(TransportError):
        b.complete(TURNS)
    assert b.attempts == 3
