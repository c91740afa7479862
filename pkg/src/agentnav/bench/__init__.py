"""Benchmark harness: world generation, suite runs, metrics and the CLI."""

from .genworld import generate, generate_world
from .metrics import MeanSE, ReportError, SuiteReport, compute_metrics, mean_se, render_report
from .suite import BackendConfig, SuiteConfigError, SuiteRun, load_dumps, load_suite, run_suite

__all__ = [
    "BackendConfig",
    "MeanSE",
    "ReportError",
    "SuiteConfigError",
    "SuiteReport",
    "SuiteRun",
    "compute_metrics",
    "generate",
    "generate_world",
    "load_dumps",
    "load_suite",
    "mean_se",
    "render_report",
    "run_suite",
]
