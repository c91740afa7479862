"""Walk through one scripted episode in the small apartment fixture.

The backend replays canned replies, so every run prints the same story:
workflow generation, step selection, a navigation sub-loop, memory updates,
and the committed answer.

    python demos/walkthrough_episode.py
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from agentnav.agentloop.episode import run_episode
from agentnav.llmlink import ScriptedBackend
from agentnav.tasks import Task
from agentnav.worldsim import load_world

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    world = load_world((FIXTURES / "apartment_small.json").read_text(encoding="utf-8"))
    replies = json.loads((FIXTURES / "apartment_backpack.replies.json").read_text(encoding="utf-8"))
    task = Task("apt-backpack", "Where is the backpack?", (("A", "living room"), ("B", "kitchen")), "B")
    print(f"task: {task.question}  choices: {dict(task.choices)}")
    print(f"robot starts at {world.robot_cell}, heading {world.robot.heading:g}\n")

    result = run_episode(world, task, ScriptedBackend.from_replies(replies))

    for e in result.transcript:
        kind, p = e["kind"], e["payload"]
        if kind == "backend":
            first = (p["reply"].get("text") or "").strip().splitlines()[:1]
            print(f"[step {e['step']:>2}] ask {p['purpose']:<22} -> {first[0] if first else ''}")
        elif kind == "workflow":
            print(f"[step {e['step']:>2}] workflow ready: targets {p['perception_targets']}")
        elif kind == "dispatch":
            call = p["call"]
            print(f"[step {e['step']:>2}] call {call['name']}({call['args']}) -> {p['status']}")
        elif kind == "nav_start":
            print(f"[step {e['step']:>2}] navigation begins, observation buffer reset")
        elif kind == "nav_end":
            print(f"[step {e['step']:>2}] navigation ends")
        elif kind == "outcome":
            print(f"\noutcome: {p['outcome']}  answer: {p['answer']}  path: {p['path_length_m']} m")

    counts = Counter(e["kind"] for e in result.transcript)
    print(f"moves: {counts['move']}, observations: {counts['observation']}, backend calls: {result.backend_calls}")
    print(f"tokens: {result.total_tokens} (approximate), cost: ${result.cost}")


if __name__ == "__main__":
    main()
