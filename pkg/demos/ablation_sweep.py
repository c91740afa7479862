"""Run the deterministic oracle backend over generated houses under each
ablation and print one report table per configuration.

The oracle is a rule-based stand-in for a language model, so these numbers
show the direction in which each removed component hurts, not model quality.

    python demos/ablation_sweep.py [n_tasks]
"""

from __future__ import annotations

import sys

from agentnav.agentloop.episode import ABLATIONS, AblationConfig
from agentnav.bench.genworld import generate
from agentnav.bench.metrics import render_report
from agentnav.bench.suite import BackendConfig, run_suite
from agentnav.llmlink import Budgets


def main(n_tasks: int = 10) -> None:
    suite = [generate(seed)[::-1] for seed in range(n_tasks)]
    budgets = Budgets(max_reasoning_steps=200)
    reports = []
    for name in ABLATIONS:
        run = run_suite(suite, BackendConfig("oracle"), budgets, AblationConfig.from_name(name))
        reports.append(run.report)
        print(f"{name:<6} done: {run.report.accuracy_text()} correct / incorrect")
    print()
    print(render_report(reports), end="")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
