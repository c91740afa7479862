"""The agent loop: workflow generation, step selection and execution, navigation,
memory updates, budgets and outcome classification."""

from .episode import (
    AblationConfig,
    EpisodeConfig,
    EpisodeContext,
    EpisodeResult,
    Outcome,
    StepChoice,
    classify_outcome,
    fallback_step,
    parse_step_choice,
    replay_episode,
    run_episode,
    select_step,
)
from .interpreter import Interpreter, StepResult
from .transcript import Recorder, dumps_jsonl, loads_jsonl

__all__ = [
    "AblationConfig",
    "EpisodeConfig",
    "EpisodeContext",
    "EpisodeResult",
    "Interpreter",
    "Outcome",
    "Recorder",
    "StepChoice",
    "StepResult",
    "classify_outcome",
    "dumps_jsonl",
    "fallback_step",
    "loads_jsonl",
    "parse_step_choice",
    "replay_episode",
    "run_episode",
    "select_step",
]
