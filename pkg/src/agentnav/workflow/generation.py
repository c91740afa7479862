"""Workflow generation: 4-stage plan pipeline, zero-shot targets and termination,
recursive generation of ``gen_`` reasoning functions, and the CoT variant."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..geometry import ContractViolation
from ..llmlink.base import ChatTurn
from ..prompts import load_heuristics, system_prompt
from ..toolbus import GEN_PREFIX
from .grammar import (
    Diagnostic,
    PlanStep,
    contains_answer,
    iter_calls,
    parse_plan,
    parse_statements,
    serialize_plan,
    serialize_statements,
)

PLAN_STAGES = 4
MAX_FUNCTION_DEPTH = 2
PREDICATES = ("answer_committed", "judged")


class WorkflowGenerationError(Exception):
    """Generation failed; carries the stage index and the raw model output."""

    def __init__(self, message: str, stage: int, raw: str | None = None):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.raw = raw


class GenerationDepthExceeded(WorkflowGenerationError):
    def __init__(self, name: str, depth: int):
        super().__init__(f"generation depth exceeded for {name} (depth {depth})", 0)


@dataclass(frozen=True)
class TerminationCondition:
    description: str
    predicate: str = "answer_committed"

    def __post_init__(self) -> None:
        if self.predicate not in PREDICATES:
            raise ValueError(f"unknown termination predicate {self.predicate!r}")

    def to_dict(self) -> dict[str, str]:
        return {"description": self.description, "predicate": self.predicate}


@dataclass(frozen=True)
class ReasoningFn:
    name: str
    doc: str
    body: tuple
    params: tuple = ()

    def source(self) -> str:
        return "\n".join(serialize_statements(self.body))


@dataclass
class Workflow:
    perception_targets: list[str]
    termination: list[TerminationCondition]
    plan: list[PlanStep]
    generated_functions: dict[str, ReasoningFn] = field(default_factory=dict)

    def step(self, step_id: int) -> PlanStep:
        for s in self.plan:
            if s.id == step_id:
                return s
        raise KeyError(step_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "perception_targets": list(self.perception_targets),
            "termination": [t.to_dict() for t in self.termination],
            "plan": serialize_plan(self.plan),
            "functions": {n: {"doc": f.doc, "body": f.source()} for n, f in self.generated_functions.items()},
        }


@dataclass(frozen=True)
class ToolInfo:
    """What generation needs to know about the tool set."""

    names: frozenset[str]  # every tool the registry knows, ablated ones included
    navigation: frozenset[str]
    listing: str  # human-readable tool list for prompts

    @classmethod
    def from_registry(cls, registry) -> "ToolInfo":
        lines, nav = [], set()
        for name in registry.names():
            s = registry.schema(name)
            params = ", ".join(f"{p.name}: {p.type}{'' if p.required else '?'}" for p in s.params)
            lines.append(f"{name}({params}) -> {s.returns}: {s.description}")
            if s.category == "navigation":
                nav.add(name)
        known = set(registry.names()) | set(registry.disabled)
        return cls(frozenset(known), frozenset(nav), "\n".join(lines))


def _ask(backend, request: str, user: str) -> str:
    reply = backend.complete([ChatTurn("system", system_prompt(request)), ChatTurn("user", user)], [])
    return reply.text or ""


def _context(task: str, tools: ToolInfo) -> str:
    return f"task: {task}\ntools:\n{tools.listing}"


def _self_discover(backend, kind: str, header: str) -> str:
    """Stages 1..4 of the pipeline; returns the stage-4 text."""
    prior: list[str] = []
    text = ""
    for stage in range(1, PLAN_STAGES + 1):
        parts = [header]
        if stage == 1:
            parts.append("strategies:\n" + "\n".join(f"- {h}" for h in load_heuristics()))
        for i, p in enumerate(prior, 1):
            parts.append(f"stage {i} reply:\n{p}")
        text = _ask(backend, f"{kind}.stage{stage}", "\n\n".join(parts))
        prior.append(text)
    return text


def _strip_fences(text: str) -> str:
    m = re.search(r"```[a-zA-Z]*\n(.*?)```", text, re.S)
    return m.group(1) if m else text


def validate_plan(steps: list[PlanStep], tools: ToolInfo) -> list[str]:
    problems = []
    for st in steps:
        for call in iter_calls(st.body):
            if not (call.name in tools.names or call.name.startswith(GEN_PREFIX)):
                problems.append(f"step {st.id}: unknown tool {call.name!r}")
    return problems


def validate_function_body(body: tuple, tools: ToolInfo) -> list[str]:
    problems = []
    if contains_answer(body):
        problems.append("reasoning functions may not call answer")
    for call in iter_calls(body):
        if call.name in tools.navigation:
            problems.append(f"reasoning functions may not navigate ({call.name})")
        elif not (call.name in tools.names or call.name.startswith(GEN_PREFIX)):
            problems.append(f"unknown tool {call.name!r}")
    return problems


def _diag_text(diags: Sequence[Diagnostic | str]) -> str:
    return "\n".join(f"- {d}" for d in diags)


def _parse_plan_checked(text: str, tools: ToolInfo) -> tuple[list[PlanStep], list[Any]]:
    res = parse_plan(_strip_fences(text))
    if not res.ok:
        return [], list(res.diagnostics)
    problems = validate_plan(res.steps, tools)
    return (res.steps, []) if not problems else ([], problems)


def _plan_with_repair(backend, text: str, tools: ToolInfo, header: str, stage: int) -> list[PlanStep]:
    steps, problems = _parse_plan_checked(text, tools)
    if not problems:
        return steps
    repaired = _ask(backend, "plan.repair", f"{header}\n\nplan:\n{text}\n\nproblems:\n{_diag_text(problems)}")
    steps, problems = _parse_plan_checked(repaired, tools)
    if problems:
        raise WorkflowGenerationError(f"plan rejected after repair: {problems[0]}", stage + 1, repaired)
    return steps


def parse_targets(text: str) -> list[str]:
    m = re.search(r"\[.*?\]", text, re.S)
    if not m:
        raise WorkflowGenerationError("perception targets are not a JSON array", 0, text)
    try:
        raw = json.loads(m.group())
    except json.JSONDecodeError:
        raise WorkflowGenerationError("perception targets are not valid JSON", 0, text) from None
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise WorkflowGenerationError("perception targets must be strings", 0, text)
    out: list[str] = []
    for t in raw:
        label = " ".join(t.lower().split())
        if label and label not in out:
            out.append(label)
    return out


def parse_termination(text: str) -> list[TerminationCondition]:
    start, end = text.find("["), text.rfind("]")
    try:
        raw = json.loads(text[start : end + 1]) if start >= 0 else None
    except json.JSONDecodeError:
        raw = None
    if not isinstance(raw, list) or not raw:
        raise WorkflowGenerationError("termination conditions must be a non-empty JSON array", 0, text)
    out = []
    for item in raw:
        if not isinstance(item, dict) or not isinstance(item.get("description"), str):
            raise WorkflowGenerationError("termination condition needs a description", 0, text)
        try:
            out.append(TerminationCondition(item["description"], item.get("predicate", "answer_committed")))
        except ValueError as exc:
            raise WorkflowGenerationError(str(exc), 0, text) from None
    return out


def ensure_answer_condition(conds: list[TerminationCondition]) -> list[TerminationCondition]:
    """Question-answering workflows always stop once an answer is committed."""
    if any(c.predicate == "answer_committed" for c in conds):
        return conds
    return conds + [TerminationCondition("an answer has been committed", "answer_committed")]


def function_purpose(name: str) -> str:
    return name[len(GEN_PREFIX) :].replace("_", " ")


def referenced_functions(stmts: tuple) -> list[str]:
    out: list[str] = []
    for call in iter_calls(stmts):
        if call.name.startswith(GEN_PREFIX) and call.name not in out:
            out.append(call.name)
    return out


def generate_reasoning_function(
    backend,
    name: str,
    purpose: str,
    tools: ToolInfo,
    task: str = "",
    *,
    depth: int = 1,
    functions: dict[str, ReasoningFn] | None = None,
    _active: tuple[str, ...] = (),
) -> ReasoningFn:
    """Run the 4-stage pipeline for one ``gen_`` function (and its own gen_ callees)."""
    if not name.startswith(GEN_PREFIX) or len(name) == len(GEN_PREFIX):
        raise ContractViolation(f"reasoning function name {name!r} lacks the {GEN_PREFIX} prefix")
    if depth > MAX_FUNCTION_DEPTH:
        raise GenerationDepthExceeded(name, depth)
    if name in _active:
        raise WorkflowGenerationError(f"recursive reasoning function {name}", 0)
    functions = {} if functions is None else functions
    header = f"function: {name}\npurpose: {purpose}\n{_context(task, tools)}"
    text = _self_discover(backend, "function", header)
    body, problems = _parse_body(text, tools)
    if problems:
        text = _ask(backend, "function.repair", f"{header}\n\nbody:\n{text}\n\nproblems:\n{_diag_text(problems)}")
        body, problems = _parse_body(text, tools)
        if problems:
            raise WorkflowGenerationError(f"{name} rejected after repair: {problems[0]}", 5, text)
    fn = ReasoningFn(name, purpose, body)
    functions[name] = fn
    for callee in referenced_functions(body):
        if callee not in functions:
            generate_reasoning_function(
                backend,
                callee,
                function_purpose(callee),
                tools,
                task,
                depth=depth + 1,
                functions=functions,
                _active=_active + (name,),
            )
    return fn


def _parse_body(text: str, tools: ToolInfo) -> tuple[tuple, list[Any]]:
    body, diags = parse_statements(_strip_fences(text).strip())
    if diags:
        return (), list(diags)
    problems = validate_function_body(body, tools)
    return (body, []) if not problems else ((), problems)


def generate_workflow(backend, task: str, tools: ToolInfo, *, cot_only: bool = False) -> Workflow:
    """Produce a complete workflow for ``task``.

    Standard mode: 4 plan-stage calls (plus at most one repair), then the
    pipeline for each referenced ``gen_`` function, then one zero-shot call
    each for perception targets and termination conditions. ``cot_only``
    replaces all of it with a single call.
    """
    if cot_only:
        return _generate_cot(backend, task, tools)
    header = _context(task, tools)
    text = _self_discover(backend, "plan", header)
    plan = _plan_with_repair(backend, text, tools, header, PLAN_STAGES)
    functions: dict[str, ReasoningFn] = {}
    for st in plan:
        for name in referenced_functions(st.body):
            if name not in functions:
                generate_reasoning_function(backend, name, function_purpose(name), tools, task, functions=functions)
    targets = parse_targets(_ask(backend, "workflow.targets", header))
    termination = ensure_answer_condition(parse_termination(_ask(backend, "workflow.termination", header)))
    return Workflow(targets, termination, plan, functions)


_COT_SECTION = re.compile(r"^(TARGETS|TERMINATION|FUNCTIONS|PLAN):[ \t]*", re.M)
_COT_FUNCTION = re.compile(r'^function\s+(\w+)\s+"([^"\n]*)"\s*:[ \t]*$', re.M)


def split_cot(text: str) -> dict[str, str]:
    parts: dict[str, str] = {}
    matches = list(_COT_SECTION.finditer(text))
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        parts[m.group(1)] = text[m.end() : end].strip()
    return parts


def _cot_functions(text: str, tools: ToolInfo) -> dict[str, ReasoningFn]:
    out: dict[str, ReasoningFn] = {}
    heads = list(_COT_FUNCTION.finditer(text))
    for i, m in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
        name = m.group(1)
        if not name.startswith(GEN_PREFIX):
            raise ContractViolation(f"reasoning function name {name!r} lacks the {GEN_PREFIX} prefix")
        body, problems = _parse_body(text[m.end() : end], tools)
        if problems:
            raise WorkflowGenerationError(f"{name}: {problems[0]}", 1, text)
        out[name] = ReasoningFn(name, m.group(2), body)
    return out


def _generate_cot(backend, task: str, tools: ToolInfo) -> Workflow:
    text = _ask(backend, "plan.cot", _context(task, tools))
    parts = split_cot(text)
    missing = [s for s in ("TARGETS", "TERMINATION", "PLAN") if s not in parts]
    if missing:
        raise WorkflowGenerationError(f"missing section {missing[0]}", 1, text)
    functions = _cot_functions(parts.get("FUNCTIONS", ""), tools)
    steps, problems = _parse_plan_checked(parts["PLAN"], tools)
    if problems:
        raise WorkflowGenerationError(f"plan rejected: {problems[0]}", 1, text)
    for name in [n for st in steps for n in referenced_functions(st.body)] + [
        n for f in functions.values() for n in referenced_functions(f.body)
    ]:
        if name not in functions:
            raise WorkflowGenerationError(f"function {name} is referenced but not defined", 1, text)
    termination = ensure_answer_condition(parse_termination(parts["TERMINATION"]))
    return Workflow(parse_targets(parts["TARGETS"]), termination, steps, functions)

