"""Workflow definition, plan language, generation and termination."""

from .generation import (
    GenerationDepthExceeded,
    ReasoningFn,
    TerminationCondition,
    ToolInfo,
    Workflow,
    WorkflowGenerationError,
    generate_reasoning_function,
    generate_workflow,
)
from .grammar import (
    Answer,
    Call,
    CellLit,
    Cond,
    Diagnostic,
    If,
    MemRef,
    ParseResult,
    PlanStep,
    While,
    parse_plan,
    parse_statements,
    serialize_plan,
)
from .termination import Decision, check_termination

__all__ = [
    "Answer",
    "Call",
    "CellLit",
    "Cond",
    "Decision",
    "Diagnostic",
    "GenerationDepthExceeded",
    "If",
    "MemRef",
    "ParseResult",
    "PlanStep",
    "ReasoningFn",
    "TerminationCondition",
    "ToolInfo",
    "While",
    "Workflow",
    "WorkflowGenerationError",
    "check_termination",
    "generate_reasoning_function",
    "generate_workflow",
    "parse_plan",
    "parse_statements",
    "serialize_plan",
]
