from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

import pytest

from agentnav.agentloop.episode import (
    AblationConfig,
    EpisodeResult,
    classify_outcome,
    replay_episode,
    run_episode,
    select_step,
)
from agentnav.agentloop.interpreter import Interpreter
from agentnav.agentloop.transcript import dumps_jsonl, loads_jsonl
from agentnav.geometry import ContractViolation
from agentnav.llmlink import BackendReply, Budgets, OracleBackend, ScriptedBackend, Usage, request_tag
from agentnav.workflow.generation import TerminationCondition, Workflow
from agentnav.workflow.grammar import parse_plan
from make_goldens import APARTMENT_TASK, scripted_episode
from oracles import bfs_distance
from test_toolbus import make_ctx

FIXTURES = Path(__file__).parent / "fixtures"


# outcome classification


@pytest.mark.parametrize(
    "answer, kw, expect",
    [
        ("B", {}, "success"),
        ("A", {}, "failure"),
        ("A", {"call_error": True, "steps_used": 500}, "failure"),
        (None, {"call_error": True}, "inconclusive(function_call_error)"),
        (None, {"cost": Decimal("5.01")}, "inconclusive(cost_limit)"),
        (None, {"steps_used": 500}, "inconclusive(time_limit)"),
    ],
)
def test_classify(answer, kw, expect):
    assert str(classify_outcome(answer, "B", **kw)) == expect


def test_classify_requires_a_reason():
    with pytest.raises(ContractViolation):
        classify_outcome(None, "B", cost=Decimal("5.00"), steps_used=499)


# step selection


def three_steps():
    plan = parse_plan('step 1 "a": rotate(90) step 2 "b": rotate(90) step 3 "c": rotate(90)').steps
    return Workflow(["x"], [TerminationCondition("done")], plan)


@pytest.mark.parametrize(
    "replies, expect",
    [
        (["step 2"], ("step", 2)),
        (["Step 1 again"], ("repeat", 1)),
        (["??", "nonsense"], ("step", 2)),
        (["step 9", "3"], ("step", 3)),
        (["terminate"], ("terminate", None)),
    ],
)
def test_select_step(replies, expect):
    b = ScriptedBackend.from_replies(replies)
    c = select_step(b, three_steps(), "memory", done={1})
    assert (c.kind, c.step_id) == expect


# interpreter


@pytest.fixture
def ctx(apartment):
    c = make_ctx(apartment, APARTMENT_TASK)
    c.sense()
    return c


def run_body(ctx, body):
    (step,) = parse_plan(f'step 1 "t": {body}').steps
    return Interpreter(ctx).execute_step(step)


def test_rotate_step(ctx):
    r = run_body(ctx, "rotate(90)")
    assert r.status == "done" and ctx.world.robot.heading == 180.0


def test_goto_suspends_then_resumes(ctx):
    interp = Interpreter(ctx)
    (step,) = parse_plan('step 1 "t": goto(4, 4, 0) rotate(90)').steps
    r = interp.execute_step(step)
    assert r.status == "nav" and r.nav_goal.cell == (4, 4)
    assert 1 in interp.suspended
    r = interp.execute_step(step)
    assert r.status == "done" and r.resumed and [x.name for x in r.results] == ["rotate"]


def test_bounded_loop_evaluations(ctx):
    run_body(ctx, "while visibility_check((3,3), (3,4)) max 3 do rotate(0) end")
    names = [e["payload"]["call"]["name"] for e in ctx.recorder.events if e["kind"] == "dispatch"]
    assert names.count("visibility_check") == 3
    assert ctx.steps_used == 6


def test_memory_references(ctx):
    from agentnav.memory import Landmark

    ctx.memory.landmarks.append(Landmark("doorway", (3, 5)))
    r = run_body(ctx, "shortest_path_length(mem.robot, mem.doorway)")
    assert r.results[0].text == "0.50 m"


def test_answer_commits(ctx):
    r = run_body(ctx, 'answer("b")')
    assert r.status == "answered" and r.answer == "B" and ctx.memory.answer == "B"


def test_arg_error_gets_one_repair(ctx):
    ctx.backend = ScriptedBackend.from_replies(["goto(4, 4, 0)"])
    r = run_body(ctx, 'goto("four", 4, 0)')
    assert r.status == "nav" and ctx.faults == 0


def test_unrepaired_errors_escalate(ctx):
    from agentnav.errors import FunctionCallEscalation

    ctx.backend = ScriptedBackend.from_replies(["nonsense"] * 3)
    for _ in range(2):
        run_body(ctx, 'goto("four", 4, 0)')
    assert ctx.faults == 2
    with pytest.raises(FunctionCallEscalation):
        run_body(ctx, 'goto("four", 4, 0)')


# whole episodes


def test_golden_scripted_episode():
    r = scripted_episode()
    golden = (FIXTURES / "apartment_backpack.golden.jsonl").read_text(encoding="utf-8")
    assert dumps_jsonl(r.transcript) == golden
    assert (r.outcome, r.answer, r.path_length_m) == ("success", "B", 1.25)


def test_golden_follows_loop_structure():
    events = loads_jsonl((FIXTURES / "apartment_backpack.golden.jsonl").read_text(encoding="utf-8"))
    kinds = [e["kind"] for e in events]
    purposes = [e["payload"]["purpose"] for e in events if e["kind"] == "backend"]
    assert purposes[:6] == [
        "plan.stage1",
        "plan.stage2",
        "plan.stage3",
        "plan.stage4",
        "workflow.targets",
        "workflow.termination",
    ]
    # generate, then initial observation, then select / execute / update cycles
    i = kinds.index("workflow")
    assert kinds[i + 1 : i + 3] == ["observation", "termination_check"]
    nav = kinds.index("nav_start")
    assert kinds[nav - 3 : nav] == ["step_result", "backend", "memory_update"]
    end = kinds.index("nav_end")
    assert kinds[nav + 1 : end] == ["move", "observation"] * 5
    assert events[nav]["payload"]["buffer_reset"] is True
    assert kinds[end + 1 : end + 3] == ["backend", "memory_update"]
    assert events[end + 1]["payload"]["purpose"] == "memory_update"
    assert "observations: 5 total" in events[end + 1]["payload"]["prompt"][1][1]
    assert kinds[-2:] == ["termination_check", "outcome"]


def test_path_accounting_matches_moves():
    r = scripted_episode()
    moves = sum(1 for e in r.transcript if e["kind"] == "move")
    assert r.path_length_m == 0.25 * moves


def test_usage_sum_equals_ledger():
    r = scripted_episode()
    backend = [e for e in r.transcript if e["kind"] == "backend"]
    assert sum(e["payload"]["reply"]["usage"]["prompt_tokens"] for e in backend) == r.prompt_tokens
    assert sum(e["payload"]["reply"]["usage"]["completion_tokens"] for e in backend) == r.completion_tokens
    assert sum(e["tokens"] for e in backend) == r.total_tokens
    assert len(backend) == r.backend_calls


class Looping:
    """Never answers: fixed generation replies, then 'step 1' and empty edits forever."""

    PLAN = 'step 1 "spin": rotate(90)'

    def __init__(self, usage=Usage(1000, 0)):
        self.usage = usage

    def complete(self, turns, tools=()):
        tag = request_tag(turns)
        text = {
            "plan.stage4": self.PLAN,
            "workflow.targets": '["unicorn"]',
            "workflow.termination": '[{"description": "answered"}]',
            "select_step": "step 1",
            "memory_update": "[]",
        }.get(tag, "ok")
        return BackendReply(text, None, self.usage)


@pytest.mark.parametrize("limit", [1, 3, 17])
def test_time_limit_exactly_at_budget(apartment, limit):
    r = run_episode(apartment, APARTMENT_TASK, Looping(Usage(0, 0)), Budgets(max_reasoning_steps=limit))
    assert (r.outcome, r.cause) == ("inconclusive", "time_limit")
    assert r.reasoning_steps == limit
    assert max(e["step"] for e in r.transcript) <= limit


PER_CALL = Decimal("0.0025")  # 1000 prompt tokens at 0.0025 per 1k
EPS = Decimal("0.000001")


@pytest.mark.parametrize(
    "limit, calls",
    [(10 * PER_CALL - EPS, 10), (10 * PER_CALL, 11), (10 * PER_CALL + EPS, 11)],
)
def test_cost_limit_boundaries(apartment, limit, calls):
    r = run_episode(apartment, APARTMENT_TASK, Looping(), Budgets(max_cost=limit))
    assert (r.outcome, r.cause) == ("inconclusive", "cost_limit")
    assert r.backend_calls == calls
    assert Decimal(r.cost) == calls * PER_CALL
    assert Decimal(r.cost) <= limit + PER_CALL


def test_malformed_calls_escalate(apartment):
    replies = ["h", "a", "p", 'step 1 "x": goto("a", 1, 0)', '["mug"]', '[{"description": "answered"}]']
    replies += ["step 1", 'goto("b", 1, 0)', "[]"] * 3
    r = run_episode(apartment, APARTMENT_TASK, ScriptedBackend.from_replies(replies))
    assert (r.outcome, r.cause) == ("inconclusive", "function_call_error")
    assert "FunctionCallEscalation" in r.error


def test_generation_failure_is_a_call_error(apartment):
    replies = ["h", "a", "p", "not a plan", "still not a plan"]
    r = run_episode(apartment, APARTMENT_TASK, ScriptedBackend.from_replies(replies))
    assert (r.outcome, r.cause) == ("inconclusive", "function_call_error")
    assert r.error.startswith("WorkflowGenerationError")


def test_oracle_is_there_task(apartment_doc):
    from agentnav.tasks import Task
    from agentnav.worldsim import load_world

    doc = json.loads(apartment_doc)
    doc["rooms"][1]["label"] = "bedroom"
    doc["objects"].append({"id": "banjo_1", "label": "banjo", "cell": [1, 8], "room": "kitchen"})
    world = load_world(doc)
    task = Task("banjo", "Is there a banjo in a bedroom?", (("A", "yes"), ("B", "no")), "A")
    r = run_episode(world, task, OracleBackend())
    assert (r.outcome, r.answer) == ("success", "A")
    bfs = bfs_distance(lambda c: world.in_bounds(c) and world.is_free(c), world.robot_cell, (1, 8))
    assert r.path_length_m <= 2 * bfs * world.resolution


@pytest.mark.parametrize("ablation", ["none", "nosg", "noogm", "norp", "cot"])
def test_oracle_replay_is_byte_identical(apartment, ablation):
    r = run_episode(apartment, APARTMENT_TASK, OracleBackend(), ablation=AblationConfig.from_name(ablation))
    events = loads_jsonl(dumps_jsonl(r.transcript))
    again = replay_episode(events)
    assert again.to_json() == r.to_json()
    assert EpisodeResult.from_dict(json.loads(r.to_json())).to_json() == r.to_json()


def test_replay_detects_tampering(apartment):
    r = run_episode(apartment, APARTMENT_TASK, OracleBackend())
    events = json.loads(json.dumps(r.transcript))
    events[0]["payload"]["task"]["question"] = "Where is the toaster?"
    again = replay_episode(events)
    assert again.outcome == "inconclusive" and "TranscriptMismatch" in again.error


def test_episode_does_not_mutate_world(apartment):
    before = apartment.to_dict()
    run_episode(apartment, APARTMENT_TASK, OracleBackend())
    assert apartment.to_dict() == before
