"""TERMINATE check: mechanical answer conditions plus backend-judged ones."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..llmlink.base import BackendError, ChatTurn
from ..prompts import system_prompt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Decision:
    terminate: bool
    answer: str | None = None
    reason: str = ""


CONTINUE = Decision(False)


def check_termination(workflow, memory, backend=None, memory_view: str = "", on_warning=None) -> Decision:
    """Any satisfied condition terminates.

    ``answer_committed`` conditions are read from memory; ``judged`` ones cost
    one backend exchange each. A failing backend counts as "not satisfied".
    """
    for cond in workflow.termination:
        if cond.predicate == "answer_committed":
            if memory.answer is not None:
                return Decision(True, memory.answer, cond.description)
    for cond in workflow.termination:
        if cond.predicate != "judged" or backend is None:
            continue
        turns = [
            ChatTurn("system", system_prompt("termination.judge")),
            ChatTurn("user", f"{memory_view}\n\n# condition\n{cond.description}"),
        ]
        try:
            reply = backend.complete(turns, [])
        except BackendError as exc:
            log.warning("termination judge failed: %s", exc)
            if on_warning is not None:
                on_warning(f"termination judge failed: {exc}")
            continue
        if (reply.text or "").strip().lower().startswith("yes"):
            return Decision(True, memory.answer, cond.description)
    return CONTINUE
