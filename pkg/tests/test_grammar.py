from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentnav.workflow.grammar import (
    Answer,
    Call,
    CellLit,
    If,
    MemRef,
    While,
    parse_call,
    parse_plan,
    parse_statements,
    serialize_plan,
    static_cost,
)
from strategies import plans, random_plan


def test_single_step():
    res = parse_plan('step 1 "scan": explore_frontiers()')
    assert res.ok
    assert len(res.steps) == 1
    assert res.steps[0].body == (Call("explore_frontiers"),)


def test_bounded_loop():
    res = parse_plan('step 1 "x":\n  while reachable((0,0),(5,5)) max 3 do rotate(90) end')
    (loop,) = res.steps[0].body
    assert isinstance(loop, While) and loop.bound == 3
    assert loop.cond.call == Call("reachable", (CellLit(0, 0), CellLit(5, 5)))


def test_unbounded_loop_diagnostic():
    res = parse_plan('step 1 "x":\n  while reachable((0,0),(5,5)) do rotate(90) end')
    assert not res.ok
    d = res.diagnostics[0]
    assert d.message == "loop bound required" and d.expected == ("max",)
    assert (d.line, d.col) == (2, 32)


@pytest.mark.parametrize(
    "text, needle",
    [
        ('step 1 "x": while f() max 51 do g() end', "loop bound must be in 1..50"),
        ('step 1 "x": while f() max 0 do g() end', "loop bound must be in 1..50"),
        ('step 1 "x":', "a statement is required"),
        ('step 1 "x": f(', "unexpected end of input"),
        ('step 1 "x": f("open)', "unterminated string"),
        ('step 1 "x": f() step 1 "y": g()', "duplicate step id 1"),
        ("", "unexpected end of input"),
        ('step 1 "x": if f() then if g() then if h() then if k() then z() end end end end', "nesting depth exceeds 3"),
        ('step 1 "x": f(@)', "unexpected character '@'"),
    ],
)
def test_diagnostics(text, needle):
    res = parse_plan(text)
    assert not res.ok and res.steps == []
    assert needle in str(res.diagnostics[0])


def test_static_cost_limit():
    # two nested 50-bound loops around k calls cost 2601 + 2500 k
    def plan(k):
        return 'step 1 "x": while a() max 50 do while b() max 50 do ' + "f() " * k + "end end"

    assert parse_plan(plan(38)).ok
    res = parse_plan(plan(39))
    assert str(res.diagnostics[0]) == "line 0, column 0: step 1 may execute more than 100000 statements"


def test_static_cost_arithmetic():
    (w,) = parse_statements("while a() max 4 do b() c() end")[0]
    assert static_cost((w,)) == 4 * (1 + 2) + 1
    assert static_cost(parse_statements("if a() then b() else c() d() end")[0]) == 3


def test_all_argument_forms():
    call = parse_call('f("s\\n", -3, 2.5, true, false, (1, 2), ["a", "b"], mem.sofa)')
    assert call.args == ("s\n", -3, 2.5, True, False, CellLit(1, 2), ("a", "b"), MemRef("sofa"))
    assert parse_call("f(") is None
    assert parse_call("f() g()") is None


def test_comments_and_answer():
    text = '# plan\nstep 2 "done": # trailing\n  answer("B")\n'
    res = parse_plan(text)
    assert res.steps[0].body == (Answer("B"),)


def test_if_else():
    (s,) = parse_statements("if not f() then g() else h() end")[0]
    assert isinstance(s, If) and s.cond.negated and s.orelse == (Call("h"),)


@settings(max_examples=100, deadline=None)
@given(plans())
def test_round_trip_hypothesis(steps):
    text = serialize_plan(steps)
    res = parse_plan(text)
    assert res.ok, res.diagnostics
    assert res.steps == steps
    assert serialize_plan(res.steps) == text


def test_round_trip_seeded():
    rng = random.Random(11)
    for _ in range(300):
        steps = random_plan(rng)
        res = parse_plan(serialize_plan(steps))
        assert res.ok and res.steps == steps


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=300))
def test_fuzz_never_raises(data):
    res = parse_plan(data.decode("latin-1"))
    assert res.ok or res.diagnostics


def test_deep_nesting_input_is_diagnosed():
    res = parse_plan('step 1 "x": f(' + "(" * 5000)
    assert not res.ok
