from __future__ import annotations

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))  # for the oracles module


@pytest.fixture
def apartment_doc() -> str:
    return (FIXTURES / "apartment_small.json").read_text(encoding="utf-8")


@pytest.fixture
def apartment(apartment_doc):
    from agentnav.worldsim import load_world

    return load_world(apartment_doc)


@pytest.fixture
def apartment_task():
    from agentnav.tasks import Task

    return Task(
        "apt-backpack",
        "Where is the backpack?",
        (("A", "living room"), ("B", "kitchen")),
        "B",
        "apartment_small.json",
    )


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
