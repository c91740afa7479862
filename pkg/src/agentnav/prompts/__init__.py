"""Version-pinned prompt templates and the stage-1 heuristic set."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

PROMPT_VERSION = "1"


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    text = resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


@lru_cache(maxsize=None)
def load_heuristics() -> tuple[str, ...]:
    lines = load_prompt("heuristics").splitlines()
    return tuple(line[2:] for line in lines if line.startswith("- "))


def system_prompt(request: str, name: str | None = None) -> str:
    """System turn: a request tag line followed by the template body."""
    body = load_prompt(name or request.replace(".", "_"))
    return f"request: {request}\nprompt-version: {PROMPT_VERSION}\n{body}"
