"""Plan-language interpreter.

Step bodies run as generators: a navigation goal suspends the step (the
goal is yielded) and the same generator resumes when the step is selected
again. ``answer`` commits and ends the step.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Generator

from ..llmlink.base import ChatTurn, ToolCall
from ..memory import SECTIONS
from ..prompts import system_prompt
from ..toolbus import NavGoal, Status, ToolOutput, ToolResult, ToolSchema
from ..workflow.generation import ReasoningFn
from ..workflow.grammar import Answer, Call, CellLit, If, MemRef, PlanStep, While, format_call, parse_call


class _Answered(Exception):
    def __init__(self, choice: str):
        super().__init__(choice)
        self.choice = choice


@dataclass
class StepResult:
    step_id: int
    title: str
    status: str  # done | answered | nav
    results: list[ToolResult] = field(default_factory=list)
    nav_goal: NavGoal | None = None
    answer: str | None = None
    resumed: bool = False

    def summary(self) -> str:
        head = f"step {self.step_id} ({self.title}): {self.status}"
        if self.answer is not None:
            head += f", answer {self.answer}"
        if self.nav_goal is not None:
            head += f", navigation goal ({self.nav_goal.cell[0]},{self.nav_goal.cell[1]})"
        return "\n".join([head] + [r.render() for r in self.results])

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step_id,
            "status": self.status,
            "calls": [r.name for r in self.results],
            "nav_goal": self.nav_goal.to_dict() if self.nav_goal else None,
            "answer": self.answer,
            "resumed": self.resumed,
        }


class Interpreter:
    """Evaluates plan statements against an episode context.

    Each call evaluation and each ``answer`` is charged one reasoning step.
    An argument error gets one repair exchange with the backend; a call that
    still fails counts as a fault on the context.
    """

    def __init__(self, ctx):
        self.ctx = ctx
        self.suspended: dict[int, Generator] = {}
        self._ids = itertools.count(1)
        self._results: list[ToolResult] = []
        self._depth = 0
        self._last: ToolResult | None = None

    def execute_step(self, step: PlanStep) -> StepResult:
        self._results = []
        gen = self.suspended.pop(step.id, None)
        resumed = gen is not None
        if gen is None:
            gen = self._block(step.body)
        try:
            goal = next(gen)
        except StopIteration:
            return StepResult(step.id, step.title, "done", self._results, resumed=resumed)
        except _Answered as a:
            return StepResult(step.id, step.title, "answered", self._results, answer=a.choice, resumed=resumed)
        self.suspended[step.id] = gen
        return StepResult(step.id, step.title, "nav", self._results, nav_goal=goal, resumed=resumed)

    def call_function(self, fn: ReasoningFn) -> ToolOutput:
        """Run a reasoning function body; its value is that of its last call."""
        self._depth += 1
        self._last = None
        try:
            gen = self._block(fn.body)
            try:
                next(gen)
            except StopIteration:
                pass
            else:
                gen.close()
                raise RuntimeError(f"{fn.name} attempted to navigate")
        finally:
            self._depth -= 1
        last = self._last
        if last is None:
            return ToolOutput(f"{fn.name}: no value", None)
        return ToolOutput(f"{fn.name}: {last.text}", last.value if last.ok else None)

    def function_schema(self, fn: ReasoningFn) -> ToolSchema:
        return ToolSchema(fn.name, fn.doc or fn.name, (), "value of its last call", "reasoning")

    def register_functions(self, registry, functions: dict[str, ReasoningFn]) -> None:
        for fn in functions.values():
            registry.register(self.function_schema(fn), lambda ctx, args, fn=fn: self.call_function(fn))

    def _block(self, stmts: tuple) -> Generator:
        for s in stmts:
            if isinstance(s, Call):
                yield from self._eval_call(s)
            elif isinstance(s, Answer):
                self.ctx.charge_step()
                raise _Answered(self.ctx.commit_answer(s.choice))
            elif isinstance(s, If):
                ok = yield from self._eval_cond(s.cond)
                yield from self._block(s.then if ok else s.orelse)
            elif isinstance(s, While):
                for _ in range(s.bound):
                    ok = yield from self._eval_cond(s.cond)
                    if not ok:
                        break
                    yield from self._block(s.body)
            else:  # pragma: no cover - parser guarantees statement types
                raise TypeError(f"not a statement: {s!r}")

    def _eval_cond(self, cond) -> Generator:
        result = yield from self._eval_call(cond.call)
        truth = bool(result.ok and result.value)
        return truth != cond.negated

    def _eval_call(self, call: Call) -> Generator:
        args = self.bind(call)
        self.ctx.charge_step()
        result = self.ctx.dispatch(ToolCall(call.name, args, self._next_id()))
        if result.status is Status.ARG_ERROR:
            result = self._repair(call.name, args, result)
        if result.status is Status.OK:
            self.ctx.faults = 0
        self._last = result
        if self._depth == 0:
            self._results.append(result)
        if result.nav_goal is not None:
            yield result.nav_goal
        return result

    def _next_id(self) -> str:
        return f"c{next(self._ids)}"

    def bind(self, call: Call) -> dict[str, Any]:
        """Positional plan arguments to named tool arguments."""
        reg = self.ctx.registry
        names = reg.schema(call.name).param_names() if call.name in reg else []
        out: dict[str, Any] = {}
        for i, a in enumerate(call.args):
            out[names[i] if i < len(names) else f"arg{i + 1}"] = self._value(a)
        return out

    def _value(self, a: Any) -> Any:
        if isinstance(a, CellLit):
            return [a.row, a.col]
        if isinstance(a, MemRef):
            return self._resolve(a.name)
        if isinstance(a, tuple):
            return list(a)
        return a

    def _resolve(self, name: str) -> Any:
        mem = self.ctx.memory
        lm = mem.landmark(name)
        if lm is not None:
            return [lm.cell[0], lm.cell[1]]
        if name in SECTIONS:
            return mem.sections[name]
        if name == "robot":
            cell = self.ctx.world.robot_cell
            return [cell[0], cell[1]]
        if name == "answer":
            return mem.answer
        return None

    def _repair(self, name: str, args: dict[str, Any], failed: ToolResult) -> ToolResult:
        ctx = self.ctx
        turns = [
            ChatTurn("system", system_prompt("call.repair")),
            ChatTurn("user", f"call: {name} {json.dumps(args, sort_keys=True)}\nerror: {failed.text}"),
        ]
        reply = ctx.backend.complete(turns, ctx.registry.describe_all())
        call = None
        if reply.tool_calls:
            tc = reply.tool_calls[0]
            call = ToolCall(tc.name, tc.args, self._next_id())
        else:
            parsed = parse_call(reply.text or "")
            if parsed is not None:
                call = ToolCall(parsed.name, self.bind(parsed), self._next_id())
        result = failed
        if call is not None:
            ctx.charge_step()
            result = ctx.dispatch(call)
        if result.status is Status.ARG_ERROR:
            desc = format_call(Call(name, ())) if call is None else call.name
            ctx.record_fault(f"{desc}: {result.text}")
        return result


__all__ = ["Interpreter", "StepResult"]
