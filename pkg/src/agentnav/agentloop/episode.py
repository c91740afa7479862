"""The episode loop: generate a workflow, then select / execute / update memory,
with a navigation sub-loop whenever a step yields a goal."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from typing import Any

from ..errors import BudgetExceeded, FunctionCallEscalation
from ..geometry import Cell, ContractViolation
from ..llmlink.base import (
    BackendError,
    Budgets,
    ChatTurn,
    UsageLedger,
    over_budget,
    prompt_hash,
    record_usage,
    request_tag,
)
from ..mapping import OccupancyGrid, integrate
from ..memory import AgentMemory, apply_update, init_memory, render
from ..navtools import astar, follow_path
from ..prompts import system_prompt
from ..scenegraph import SceneGraph, add_region, add_traversable, upsert_from_observation
from ..stdtools import standard_registry
from ..tasks import Task
from ..toolbus import ToolCall, ToolRegistry, ToolResult
from ..workflow.generation import ToolInfo, Workflow, WorkflowGenerationError, generate_workflow
from ..workflow.termination import check_termination
from ..worldsim import DEFAULT_FOV, DEFAULT_RANGE, GridWorld, Observation, observe, rotate_robot
from .interpreter import Interpreter, StepResult
from .transcript import Recorder, canonical_json

FAULT_LIMIT = 3
RESULT_CHARS = 4000  # step-result text passed to a memory update
CAUSES = ("time_limit", "cost_limit", "function_call_error")
OUTCOMES = ("success", "failure", "inconclusive")
ABLATIONS = ("none", "nosg", "noogm", "norp", "cot")


@dataclass(frozen=True)
class AblationConfig:
    no_scene_graph: bool = False
    no_ogm: bool = False
    no_raster: bool = False
    cot_only: bool = False

    @property
    def include_raster(self) -> bool:
        return not (self.no_ogm or self.no_raster)

    @classmethod
    def from_name(cls, name: str) -> "AblationConfig":
        table = {
            "none": cls(),
            "nosg": cls(no_scene_graph=True),
            "noogm": cls(no_ogm=True),
            "norp": cls(no_ogm=True, no_raster=True),
            "cot": cls(cot_only=True),
        }
        if name not in table:
            raise ValueError(f"unknown ablation {name!r}")
        return table[name]

    def to_dict(self) -> dict[str, bool]:
        return asdict(self)


@dataclass(frozen=True)
class EpisodeConfig:
    fov_degrees: float = DEFAULT_FOV
    max_range: float = DEFAULT_RANGE
    look_around: bool = True  # 4 x 90 deg scan on reaching a frontier goal

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Outcome:
    kind: str
    cause: str | None = None

    def __str__(self) -> str:
        return f"{self.kind}({self.cause})" if self.cause else self.kind


def classify_outcome(
    answer: str | None,
    answer_key: str,
    *,
    call_error: bool = False,
    cost: Decimal = Decimal(0),
    max_cost: Decimal = Decimal("5.00"),
    steps_used: int = 0,
    max_steps: int = 500,
) -> Outcome:
    """A committed answer decides success or failure; otherwise the breach does."""
    if answer is not None:
        return Outcome("success" if answer == answer_key else "failure")
    if call_error:
        return Outcome("inconclusive", "function_call_error")
    if Decimal(cost) > Decimal(max_cost):
        return Outcome("inconclusive", "cost_limit")
    if steps_used >= max_steps:
        return Outcome("inconclusive", "time_limit")
    raise ContractViolation("episode ended without an answer or a budget breach")


@dataclass
class EpisodeResult:
    task_id: str
    outcome: str
    cause: str | None
    answer: str | None
    answer_key: str
    path_length_m: float
    prompt_tokens: int
    completion_tokens: int
    cost: str
    reasoning_steps: int
    backend_calls: int
    error: str | None = None
    transcript: list[dict[str, Any]] = field(default_factory=list)
    memory: dict[str, Any] | None = None

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EpisodeResult":
        return cls(**d)


class MeteredBackend:
    """Wraps the real backend: budget checks, usage ledger, transcript events."""

    def __init__(self, inner, ctx: "EpisodeContext"):
        self.inner = inner
        self.ctx = ctx

    def complete(self, turns, tools=()):
        ctx = self.ctx
        if over_budget(ctx.ledger, ctx.budgets):
            raise BudgetExceeded("cost_limit", f"cost {ctx.ledger.cost} exceeds {ctx.budgets.max_cost}")
        if ctx.phase == "execution":
            ctx.charge_step()
        digest = prompt_hash(turns, tools)
        reply = self.inner.complete(turns, tools)
        record_usage(ctx.ledger, reply.usage)
        ctx.recorder.emit(
            "backend",
            {
                "purpose": request_tag(turns),
                "prompt_hash": digest,
                "prompt": [[t.role, t.content] for t in turns],
                "tools": [d["name"] for d in tools],
                "reply": reply.to_dict(),
            },
            tokens=reply.usage.total,
        )
        if over_budget(ctx.ledger, ctx.budgets):
            raise BudgetExceeded("cost_limit", f"cost {ctx.ledger.cost} exceeds {ctx.budgets.max_cost}")
        return reply


@dataclass
class EpisodeContext:
    world: GridWorld
    task: Task
    budgets: Budgets
    ablation: AblationConfig
    config: EpisodeConfig
    registry: ToolRegistry
    grid: OccupancyGrid
    graph: SceneGraph | None
    recorder: Recorder
    ledger: UsageLedger
    backend: Any = None
    memory: AgentMemory | None = None
    observations: list[Observation] = field(default_factory=list)
    regions: dict[str, tuple[int, int, int, int]] = field(default_factory=dict)
    seen_rooms: set[str] = field(default_factory=set)
    steps_used: int = 0
    faults: int = 0
    moves: int = 0
    phase: str = "generation"
    workflow_targets: list[str] = field(default_factory=list)

    @property
    def bounds(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def detections_only(self) -> bool:
        return self.ablation.no_raster

    def charge_step(self) -> None:
        if self.steps_used >= self.budgets.max_reasoning_steps:
            raise BudgetExceeded("time_limit", f"{self.steps_used} reasoning steps used")
        self.steps_used += 1

    def sense(self, integrate_grid: bool = True) -> Observation:
        """Observe, update the belief grid, regions and scene graph, and record it."""
        obs = observe(self.world, self.config.fov_degrees, self.config.max_range, len(self.observations))
        if integrate_grid:
            integrate(self.grid, obs)
        seen = [c for c, _ in obs.visible_cells]
        for room in self.world.rooms:
            if room.id in self.seen_rooms or not any(room.contains(c) for c in seen):
                continue
            self.seen_rooms.add(room.id)
            self.regions.setdefault(room.label, room.rect)
            if self.graph is not None:
                add_region(self.graph, room.id, room.label, room.rect, obs.timestep)
        touched: list[str] = []
        if self.graph is not None:
            touched = upsert_from_observation(self.graph, obs, self.workflow_targets)
        self.observations.append(obs)
        self.recorder.emit(
            "observation",
            {
                "t": obs.timestep,
                "cell": list(obs.robot_cell),
                "heading": obs.pose.heading,
                "visible": len(obs.visible_cells),
                "detections": [d.object_id for d in obs.detections],
                "graph_nodes": touched,
            },
        )
        return obs

    def view_text(self, obs: Observation) -> str:
        return obs.detection_text() if self.detections_only else obs.rendered_view

    def dispatch(self, call: ToolCall) -> ToolResult:
        result = self.registry.dispatch(call, self)
        self.recorder.emit("dispatch", {"call": call.to_dict(), "status": result.status.value, "text": result.text})
        return result

    def record_fault(self, detail: str) -> None:
        self.faults += 1
        self.workflow_event(f"function call fault {self.faults}/{FAULT_LIMIT}: {detail}")
        if self.faults >= FAULT_LIMIT:
            raise FunctionCallEscalation(f"{FAULT_LIMIT} consecutive malformed invocations; last: {detail}")

    def workflow_event(self, summary: str) -> None:
        if self.memory is not None:
            self.memory.log("workflow_event", summary)
        self.recorder.emit("workflow_event", {"summary": summary})

    def commit_answer(self, raw: str) -> str:
        choice = self.task.normalize_answer(raw)
        self.memory.answer = choice
        return choice

    def record_move(self, cell: Cell) -> None:
        self.moves += 1
        self.recorder.emit("move", {"cell": list(cell)})

    def memory_view(self) -> str:
        return render(self.memory, self.grid, self.world.robot_cell, include_raster=self.ablation.include_raster)

    def update_memory(self, result, note: str = "") -> None:
        apply_update(
            self.memory,
            self.backend,
            result,
            grid=self.grid,
            robot=self.world.robot_cell,
            include_raster=self.ablation.include_raster,
            detections_only=self.detections_only,
            regions=self.regions,
            note=note,
        )
        entry = self.memory.action_log[-1]
        self.recorder.emit("memory_update", {"summary": entry.summary}, tokens=entry.tokens)


@dataclass(frozen=True)
class StepChoice:
    kind: str  # step | repeat | terminate
    step_id: int | None = None


_STEP_RE = re.compile(r"\bstep\s*(\d+)\b", re.I)


def parse_step_choice(text: str | None, ids: list[int], done: set[int]) -> StepChoice | None:
    t = (text or "").strip()
    m = _STEP_RE.search(t) or re.fullmatch(r"(\d+)", t)
    if m:
        sid = int(m.group(1))
        if sid in ids:
            return StepChoice("repeat" if sid in done else "step", sid)
        return None
    if re.search(r"\bterminate\b", t, re.I):
        return StepChoice("terminate")
    return None


def fallback_step(ids: list[int], done: set[int]) -> StepChoice:
    pending = [i for i in sorted(ids) if i not in done]
    if pending:
        return StepChoice("step", pending[0])
    return StepChoice("repeat", min(ids))


def step_status(step_id: int, done: set[int], suspended) -> str:
    if step_id in suspended:
        return "suspended"
    return "done" if step_id in done else "pending"


def select_step(backend, workflow: Workflow, memory_view: str, done: set[int], suspended=()) -> StepChoice:
    """Ask for the next step; one retry on an unusable reply, then the fallback."""
    ids = [s.id for s in workflow.plan]
    lines = [f"step {s.id} [{step_status(s.id, done, suspended)}] {s.title}" for s in workflow.plan]
    turns = [
        ChatTurn("system", system_prompt("select_step")),
        ChatTurn("user", f"{memory_view}\n\n# plan\n" + "\n".join(lines)),
    ]
    for _ in range(2):
        choice = parse_step_choice(backend.complete(turns, []).text, ids, done)
        if choice is not None:
            return choice
    return fallback_step(ids, done)


def _navigate(ctx: EpisodeContext, goal) -> list[Observation]:
    world, grid = ctx.world, ctx.grid
    cell = tuple(goal.cell)
    ctx.recorder.emit("nav_start", {"goal": list(cell), "explore": goal.explore, "buffer_reset": True})
    obs_seq: list[Observation] = []  # reset observation buffer
    start, moves0 = world.robot_cell, ctx.moves
    status, replans = "reached", 0
    if cell != start:
        path = astar(grid, start, cell) or astar(grid, start, cell, optimistic=True)
        if path is None:
            status = "unreachable"
        else:
            fr = follow_path(
                world, grid, path, lambda: ctx.sense(integrate_grid=False), on_move=ctx.record_move
            )
            obs_seq, status, replans = fr.observations, fr.status, fr.replans
    if status == "reached":
        if goal.explore and ctx.config.look_around:
            for _ in range(4):
                rotate_robot(world, 90)
                obs_seq.append(ctx.sense())
        if ctx.graph is not None:
            add_traversable(ctx.graph, f"waypoint:{cell[0]},{cell[1]}", cell, len(ctx.observations) - 1)
    moved = ctx.moves - moves0
    ctx.memory.log("nav", f"goal ({cell[0]},{cell[1]}) {status} after {moved} moves, {replans} replans")
    ctx.recorder.emit(
        "nav_end", {"goal": list(cell), "status": status, "moves": moved, "replans": replans, "observations": len(obs_seq)}
    )
    return obs_seq


def _final_answer(ctx: EpisodeContext) -> None:
    turns = [ChatTurn("system", system_prompt("final_answer")), ChatTurn("user", ctx.memory_view())]
    reply = ctx.backend.complete(turns, [])
    ctx.commit_answer(reply.text or "")


def _execute(ctx: EpisodeContext) -> None:
    info = ToolInfo.from_registry(ctx.registry)
    workflow = generate_workflow(ctx.backend, ctx.task.prompt_text(), info, cot_only=ctx.ablation.cot_only)
    ctx.recorder.emit("workflow", workflow.to_dict())
    ctx.workflow_targets = list(workflow.perception_targets)
    ctx.phase = "execution"
    interp = Interpreter(ctx)
    interp.register_functions(ctx.registry, workflow.generated_functions)
    ctx.memory = init_memory(ctx.task.prompt_text())
    ctx.sense()
    done: set[int] = set()
    while True:
        decision = check_termination(workflow, ctx.memory, ctx.backend, ctx.memory_view(), ctx.workflow_event)
        ctx.recorder.emit("termination_check", {"terminate": decision.terminate, "answer": decision.answer})
        if decision.terminate:
            if ctx.memory.answer is None:
                _final_answer(ctx)
            return
        choice = select_step(ctx.backend, workflow, ctx.memory_view(), done, interp.suspended)
        if choice.kind == "terminate":
            ctx.workflow_event("terminate requested without a committed answer; continuing")
            choice = fallback_step([s.id for s in workflow.plan], done)
        ctx.recorder.emit("select", {"kind": choice.kind, "step": choice.step_id})
        result: StepResult = interp.execute_step(workflow.step(choice.step_id))
        if result.status != "nav":
            done.add(result.step_id)
        ctx.recorder.emit("step_result", result.to_dict())
        ctx.update_memory(result.summary()[:RESULT_CHARS])
        if result.nav_goal is not None:
            obs_seq = _navigate(ctx, result.nav_goal)
            g = result.nav_goal.cell
            ctx.update_memory(obs_seq, note=f"navigation to ({g[0]},{g[1]}) finished")


def run_episode(
    world: GridWorld,
    task: Task,
    backend,
    budgets: Budgets | None = None,
    ablation: AblationConfig | None = None,
    config: EpisodeConfig | None = None,
) -> EpisodeResult:
    """One full episode; every failure mode folds into the returned result."""
    budgets = budgets or Budgets()
    ablation = ablation or AblationConfig()
    config = config or EpisodeConfig()
    start_doc = world.to_dict()
    world = world.copy()
    ctx = EpisodeContext(
        world=world,
        task=task,
        budgets=budgets,
        ablation=ablation,
        config=config,
        registry=standard_registry(no_scene_graph=ablation.no_scene_graph, no_raster=ablation.no_raster),
        grid=OccupancyGrid.for_world(world),
        graph=None if ablation.no_scene_graph else SceneGraph(world.shape),
        recorder=Recorder(),
        ledger=UsageLedger.for_budgets(budgets),
    )
    ctx.recorder.step_source = lambda: ctx.steps_used
    ctx.backend = MeteredBackend(backend, ctx)
    ctx.recorder.emit(
        "episode_start",
        {
            "task": task.to_dict(),
            "world": start_doc,
            "budgets": budgets.to_dict(),
            "ablation": ablation.to_dict(),
            "config": config.to_dict(),
        },
    )
    call_error, error = False, None
    try:
        _execute(ctx)
    except BudgetExceeded as exc:
        error = str(exc)
    except (FunctionCallEscalation, WorkflowGenerationError, BackendError) as exc:
        call_error, error = True, f"{type(exc).__name__}: {exc}"
    answer = ctx.memory.answer if ctx.memory is not None else None
    outcome = classify_outcome(
        answer,
        task.answer_key,
        call_error=call_error,
        cost=ctx.ledger.cost,
        max_cost=budgets.max_cost,
        steps_used=ctx.steps_used,
        max_steps=budgets.max_reasoning_steps,
    )
    path_m = ctx.moves * world.resolution
    ctx.recorder.emit(
        "outcome",
        {"outcome": outcome.kind, "cause": outcome.cause, "answer": answer, "path_length_m": path_m, "error": error},
    )
    return EpisodeResult(
        task_id=task.id,
        outcome=outcome.kind,
        cause=outcome.cause,
        answer=answer,
        answer_key=task.answer_key,
        path_length_m=path_m,
        prompt_tokens=ctx.ledger.prompt_tokens,
        completion_tokens=ctx.ledger.completion_tokens,
        cost=str(ctx.ledger.cost),
        reasoning_steps=ctx.steps_used,
        backend_calls=ctx.ledger.calls,
        error=error,
        transcript=ctx.recorder.events,
        memory=ctx.memory.to_dict() if ctx.memory is not None else None,
    )


def replay_episode(events: list[dict[str, Any]], world: GridWorld | None = None) -> EpisodeResult:
    """Re-run an episode from its own transcript with a scripted backend."""
    from ..llmlink.scripted import ScriptedBackend
    from ..worldsim import load_world

    start = next((e for e in events if e["kind"] == "episode_start"), None)
    if start is None:
        raise ValueError("transcript has no episode_start event")
    p = start["payload"]
    world = world or load_world(p["world"])
    return run_episode(
        world,
        Task.from_dict(p["task"]),
        ScriptedBackend.from_transcript(events),
        Budgets.from_dict(p["budgets"]),
        AblationConfig(**p["ablation"]),
        EpisodeConfig(**p["config"]),
    )
