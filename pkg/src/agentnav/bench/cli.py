"""Command line: ``run``, ``replay``, ``genworld`` and ``report``.

Exit codes: 0 completed, 1 usage error, 2 configuration or I/O error.
The remote backend reads its API key from ``AGENTNAV_API_KEY`` and its
endpoint from ``AGENTNAV_ENDPOINT`` unless ``--endpoint`` is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from ..agentloop.episode import ABLATIONS, AblationConfig, replay_episode
from ..agentloop.transcript import loads_jsonl
from ..llmlink.base import Budgets
from ..llmlink.remote import API_KEY_ENV, ENDPOINT_ENV
from ..tasks import dump_tasks
from ..worldsim import WorldFileError, load_world, serialize_world
from .genworld import generate_world
from .metrics import FORMATS, ReportError, compute_metrics, render_report
from .suite import BACKENDS, BackendConfig, SuiteConfigError, load_dumps, load_suite, run_suite

EXIT_OK, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is reserved here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _decimal(text: str) -> Decimal:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_finite() or value <= 0:
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agentnav", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a task suite and write dumps and a report")
    run.add_argument("--tasks", type=Path, required=True, help="task file (JSON array, format 1)")
    run.add_argument("--worlds-dir", type=Path, help="directory world references resolve against")
    run.add_argument("--backend", choices=BACKENDS, default="oracle")
    run.add_argument("--endpoint", help=f"chat-completions base URL (default ${ENDPOINT_ENV})")
    run.add_argument("--model", default="gpt-4o")
    run.add_argument("--transcripts", type=Path, help="scripted backend: directory of <task id>.jsonl")
    run.add_argument("--budget-steps", type=_positive, default=500)
    run.add_argument("--budget-cost", type=_decimal, default=Decimal("5.00"))
    run.add_argument("--ablation", choices=[a for a in ABLATIONS if a != "none"])
    run.add_argument("--parallel", type=_positive, default=1)
    run.add_argument("--seed", type=int, help="detection-noise seed for every world (default: each world's own)")
    run.add_argument("--out-dir", type=Path, required=True)
    run.add_argument("--format", choices=FORMATS, default="table")

    rep = sub.add_parser("replay", help="re-run an episode from its transcript")
    rep.add_argument("transcript", type=Path)
    rep.add_argument("--world", type=Path, help="override the world embedded in the transcript")
    rep.add_argument("--check", type=Path, help="result JSON that the replay must reproduce byte for byte")

    gen = sub.add_parser("genworld", help="write seeded random worlds and a task file")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=_positive, default=1)
    gen.add_argument("--out-dir", type=Path, required=True)

    rpt = sub.add_parser("report", help="recompute a report from transcript dumps")
    rpt.add_argument("dumps", type=Path, nargs="+", help="transcript files or directories")
    rpt.add_argument("--format", choices=FORMATS, default="table")
    rpt.add_argument("--label", default="agent")
    return p


def _cmd_run(args) -> int:
    suite = load_suite(args.tasks, args.worlds_dir)
    if args.seed is not None:
        suite = [(t, dataclasses.replace(w, seed=args.seed)) for t, w in suite]
    cfg = BackendConfig(
        args.backend,
        endpoint=args.endpoint,
        model=args.model,
        api_key=os.environ.get(API_KEY_ENV),
        transcripts_dir=args.transcripts,
    )
    budgets = Budgets(args.budget_steps, args.budget_cost)
    ablation = AblationConfig.from_name(args.ablation or "none")
    run = run_suite(suite, cfg, budgets, ablation, parallel=args.parallel, out_dir=args.out_dir)
    text = render_report(run.report, args.format)
    ext = "json" if args.format == "json" else "txt"
    try:
        (args.out_dir / f"report.{ext}").write_text(text, encoding="utf-8")
    except OSError as exc:
        raise SuiteConfigError(f"{args.out_dir}: {exc.strerror}") from None
    sys.stdout.write(text)
    return EXIT_OK


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SuiteConfigError(f"{path}: {exc.strerror}") from None


def _cmd_replay(args) -> int:
    try:
        events = loads_jsonl(_read(args.transcript))
        world = load_world(_read(args.world)) if args.world else None
        result = replay_episode(events, world)
    except (ValueError, WorldFileError) as exc:
        raise SuiteConfigError(f"{args.transcript}: {exc}") from None
    out = result.to_json()
    if args.check is not None:
        expected = _read(args.check).rstrip("\n")
        if expected != out:
            print(f"replay differs from {args.check}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"replay identical: {result.task_id} {result.outcome}")
        return EXIT_OK
    sys.stdout.write(out + "\n")
    return EXIT_OK


def _cmd_genworld(args) -> int:
    tasks = []
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        for seed in range(args.seed, args.seed + args.count):
            doc, task = generate_world(seed)
            (args.out_dir / task.world_ref).write_text(serialize_world(load_world(doc)), encoding="utf-8")
            tasks.append(task)
        (args.out_dir / "tasks.json").write_text(dump_tasks(tasks), encoding="utf-8")
    except OSError as exc:
        raise SuiteConfigError(f"{args.out_dir}: {exc.strerror}") from None
    print(f"wrote {len(tasks)} worlds and tasks.json to {args.out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    results = load_dumps(args.dumps)
    sys.stdout.write(render_report(compute_metrics(results, label=args.label), args.format))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "replay": _cmd_replay, "genworld": _cmd_genworld, "report": _cmd_report}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (SuiteConfigError, ReportError) as exc:
        print(f"agentnav: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
