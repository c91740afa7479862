"""Exceptions shared across modules."""

from __future__ import annotations

from .geometry import ContractViolation

__all__ = ["ContractViolation", "ToolError", "EpisodeInterrupt", "BudgetExceeded", "FunctionCallEscalation"]


class ToolError(RuntimeError):
    """A tool handler could not produce a result."""


class EpisodeInterrupt(Exception):
    """Ends an episode early; never swallowed by tool dispatch."""


class BudgetExceeded(EpisodeInterrupt):
    def __init__(self, cause: str, detail: str = ""):
        super().__init__(f"{cause}: {detail}" if detail else cause)
        self.cause = cause


class FunctionCallEscalation(EpisodeInterrupt):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.cause = "function_call_error"
