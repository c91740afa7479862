"""Suite runner: one isolated episode per task, optional thread parallelism,
per-episode dumps, and report recomputation from those dumps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Callable, Sequence

from ..agentloop.episode import AblationConfig, EpisodeConfig, EpisodeResult, run_episode
from ..agentloop.transcript import dumps_jsonl, loads_jsonl
from ..llmlink.base import BackendError, Budgets
from ..llmlink.oracle import OracleBackend
from ..llmlink.remote import RemoteBackend
from ..llmlink.scripted import ScriptedBackend
from ..tasks import Task, load_tasks
from ..worldsim import GridWorld, load_world
from .metrics import SuiteReport, compute_metrics

BACKENDS = ("remote", "scripted", "oracle")


class SuiteConfigError(Exception):
    """Bad configuration or unreadable inputs (CLI exit code 2)."""


@dataclass
class BackendConfig:
    kind: str = "oracle"
    endpoint: str | None = None
    model: str = "gpt-4o"
    api_key: str | None = None
    transcripts_dir: Path | None = None  # scripted replies, one <task id>.jsonl per task

    def __post_init__(self) -> None:
        if self.kind not in BACKENDS:
            raise SuiteConfigError(f"unknown backend {self.kind!r}")


@dataclass
class SuiteRun:
    results: list[EpisodeResult]
    report: SuiteReport
    dumps: dict[str, Path] = field(default_factory=dict)


def load_suite(tasks_path: Path, worlds_dir: Path | None = None) -> list[tuple[Task, GridWorld]]:
    """Tasks with their worlds; world references resolve against ``worlds_dir``
    or, by default, the task file's directory."""
    try:
        tasks = load_tasks(Path(tasks_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SuiteConfigError(f"{tasks_path}: {exc.strerror}") from None
    except ValueError as exc:
        raise SuiteConfigError(f"{tasks_path}: {exc}") from None
    base = Path(worlds_dir) if worlds_dir is not None else Path(tasks_path).parent
    cache: dict[Path, GridWorld] = {}
    out = []
    for t in tasks:
        p = base / t.world_ref
        if p not in cache:
            try:
                cache[p] = load_world(p.read_text(encoding="utf-8"))
            except OSError as exc:
                raise SuiteConfigError(f"task {t.id}: {p}: {exc.strerror}") from None
            except ValueError as exc:
                raise SuiteConfigError(f"task {t.id}: {p}: {exc}") from None
        out.append((t, cache[p]))
    return out


def backend_factory(cfg: BackendConfig) -> Callable[[Task], Any]:
    """Per-task backend constructor. Oracle and remote instances are shared
    (both are safe for concurrent sessions); scripted ones are per task."""
    if cfg.kind == "oracle":
        shared = OracleBackend()
        return lambda task: shared
    if cfg.kind == "remote":
        remote = RemoteBackend(cfg.endpoint, cfg.model, cfg.api_key)
        return lambda task: remote
    if cfg.transcripts_dir is None:
        raise SuiteConfigError("scripted backend needs a transcripts directory")
    tdir = Path(cfg.transcripts_dir)

    def scripted(task: Task) -> ScriptedBackend:
        path = tdir / f"{task.id}.jsonl"
        try:
            return ScriptedBackend.from_transcript(loads_jsonl(path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise SuiteConfigError(f"task {task.id}: {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise SuiteConfigError(f"task {task.id}: {path}: {exc}") from None

    return scripted


class _Contained:
    """Turns unexpected backend exceptions into BackendError so a faulty
    backend ends its own episode as a call error instead of the suite."""

    def __init__(self, inner: Any):
        self.inner = inner

    def complete(self, turns, tools=()):
        try:
            return self.inner.complete(turns, tools)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"backend raised {type(exc).__name__}: {exc}") from exc


def run_suite(
    suite: Sequence[tuple[Task, GridWorld]],
    backend: BackendConfig | Callable[[Task], Any],
    budgets: Budgets | None = None,
    ablation: AblationConfig | None = None,
    *,
    parallel: int = 1,
    out_dir: Path | None = None,
    config: EpisodeConfig | None = None,
    label: str | None = None,
) -> SuiteRun:
    """Run every task; episode failures become outcomes and never stop the suite."""
    if parallel < 1:
        raise SuiteConfigError("parallelism must be at least 1")
    make = backend_factory(backend) if isinstance(backend, BackendConfig) else backend
    ablation = ablation or AblationConfig()
    # build every backend first so configuration errors surface before any episode runs
    jobs = [(task, world, make(task)) for task, world in suite]

    def one(job) -> EpisodeResult:
        task, world, be = job
        return run_episode(world, task, _Contained(be), budgets, ablation, config)

    if parallel == 1:
        results = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, jobs))
    report = compute_metrics(results, label=label or ablation_label(ablation))
    dumps = write_dumps(results, out_dir) if out_dir is not None else {}
    return SuiteRun(results, report, dumps)


def ablation_label(ab: AblationConfig) -> str:
    names = {
        AblationConfig(): "agent",
        AblationConfig.from_name("nosg"): "nosg",
        AblationConfig.from_name("noogm"): "noogm",
        AblationConfig.from_name("norp"): "norp",
        AblationConfig.from_name("cot"): "cot",
    }
    return names.get(ab, "custom")


def write_dumps(results: Sequence[EpisodeResult], out_dir: Path) -> dict[str, Path]:
    """``transcripts/<id>.jsonl`` and ``results/<id>.json`` per episode."""
    out = Path(out_dir)
    try:
        (out / "transcripts").mkdir(parents=True, exist_ok=True)
        (out / "results").mkdir(parents=True, exist_ok=True)
        paths = {}
        for r in results:
            p = out / "transcripts" / f"{r.task_id}.jsonl"
            p.write_text(dumps_jsonl(r.transcript), encoding="utf-8")
            (out / "results" / f"{r.task_id}.json").write_text(r.to_json() + "\n", encoding="utf-8")
            paths[r.task_id] = p
    except OSError as exc:
        raise SuiteConfigError(f"{out}: {exc.strerror}") from None
    return paths


def result_from_transcript(events: list[dict[str, Any]]) -> EpisodeResult:
    """Reconstruct the metric-relevant fields of a result from its transcript."""
    start = next((e for e in events if e["kind"] == "episode_start"), None)
    end = next((e for e in reversed(events) if e["kind"] == "outcome"), None)
    if start is None or end is None:
        raise ValueError("transcript lacks episode_start or outcome event")
    task = start["payload"]["task"]
    budgets = Budgets.from_dict(start["payload"]["budgets"])
    backend = [e for e in events if e["kind"] == "backend"]
    pt = sum(e["payload"]["reply"].get("usage", {}).get("prompt_tokens", 0) for e in backend)
    ct = sum(e["payload"]["reply"].get("usage", {}).get("completion_tokens", 0) for e in backend)
    cost = (Decimal(pt) * budgets.rate_in_per_1k + Decimal(ct) * budgets.rate_out_per_1k) / 1000
    p = end["payload"]
    return EpisodeResult(
        task_id=task["id"],
        outcome=p["outcome"],
        cause=p["cause"],
        answer=p["answer"],
        answer_key=task["answer_key"],
        path_length_m=p["path_length_m"],
        prompt_tokens=pt,
        completion_tokens=ct,
        cost=str(cost),
        reasoning_steps=end["step"],
        backend_calls=len(backend),
        error=p["error"],
        transcript=events,
    )


def load_dumps(paths: Sequence[Path]) -> list[EpisodeResult]:
    """Results from transcript files or directories of ``*.jsonl`` files."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            found = sorted(p.glob("*.jsonl")) or sorted((p / "transcripts").glob("*.jsonl"))
            files.extend(found)
        else:
            files.append(p)
    out = []
    for f in files:
        try:
            out.append(result_from_transcript(loads_jsonl(f.read_text(encoding="utf-8"))))
        except OSError as exc:
            raise SuiteConfigError(f"{f}: {exc.strerror}") from None
        except (ValueError, KeyError) as exc:
            raise SuiteConfigError(f"{f}: {exc}") from None
    return out


__all__ = [
    "BACKENDS",
    "BackendConfig",
    "SuiteConfigError",
    "SuiteRun",
    "backend_factory",
    "load_dumps",
    "load_suite",
    "result_from_transcript",
    "run_suite",
    "write_dumps",
]
