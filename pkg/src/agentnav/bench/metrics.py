"""Suite metrics: accuracy split, mean path length, mean token usage, and the
breakdown of inconclusive runs, plus table and JSON renderings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Any, Iterable, Sequence

from ..agentloop.episode import CAUSES, OUTCOMES, EpisodeResult

FORMATS = ("table", "json")
REPORT_FORMAT = 1

REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["format", "label", "episodes", "counts", "accuracy", "inconclusive_breakdown", "path_length_m", "tokens_k"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "label": {"type": "string"},
        "episodes": {"type": "integer", "minimum": 1},
        "counts": {
            "type": "object",
            "required": list(OUTCOMES) + list(CAUSES),
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "accuracy": {
            "type": "object",
            "required": list(OUTCOMES),
            "additionalProperties": {"type": "integer", "minimum": 0, "maximum": 100},
        },
        "inconclusive_breakdown": {
            "type": "object",
            "required": list(CAUSES),
            "additionalProperties": {"type": "integer", "minimum": 0, "maximum": 100},
        },
        "path_length_m": {"$ref": "#/$defs/stat"},
        "tokens_k": {"$ref": "#/$defs/stat"},
        "task_ids": {"type": "array", "items": {"type": "string"}},
    },
    "$defs": {
        "stat": {
            "type": "object",
            "required": ["mean", "se"],
            "properties": {"mean": {"type": "number"}, "se": {"type": "number", "minimum": 0}},
        }
    },
}


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class MeanSE:
    mean: float
    se: float

    def render(self) -> str:
        return f"{self.mean:.2f} ± {self.se:.2f}"


def mean_se(values: Sequence[float]) -> MeanSE:
    """Sample mean and standard error (n-1 denominator); SE is 0 for one value."""
    n = len(values)
    if n == 0:
        raise ReportError("empty suite")
    mean = math.fsum(values) / n
    if n == 1:
        return MeanSE(mean, 0.0)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return MeanSE(mean, math.sqrt(var / n))


def half_up(x: Fraction) -> int:
    return int((Decimal(x.numerator) / Decimal(x.denominator)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def apportion(counts: Sequence[int], total: int, target: int | None = None) -> list[int]:
    """Integer percentages of ``total`` summing to ``target``, by default the
    half-up rounded share of ``sum(counts)``.

    Each entry is first rounded half-up. If those do not add up to the
    target, entries with the largest rounding error are nudged by one until
    they do, earliest entry first on ties.
    """
    exact = [Fraction(c * 100, total) for c in counts]
    if target is None:
        target = half_up(Fraction(sum(counts) * 100, total))
    out = [half_up(x) for x in exact]
    while sum(out) != target:
        step = 1 if target > sum(out) else -1
        # nudge the entry left furthest from its exact value in that direction
        i = max(range(len(out)), key=lambda k: (step * (exact[k] - out[k]), -k))
        out[i] += step
    return out


@dataclass
class SuiteReport:
    label: str
    episodes: int
    counts: dict[str, int]
    accuracy: dict[str, int]
    breakdown: dict[str, int]
    path_length_m: MeanSE
    tokens_k: MeanSE
    task_ids: list[str] = field(default_factory=list)
    shares: dict[str, Fraction] = field(default_factory=dict, repr=False)

    def accuracy_text(self) -> str:
        return f"{self.accuracy['success']} / {self.accuracy['failure']}"

    def breakdown_text(self) -> str:
        return " / ".join(str(self.breakdown[c]) for c in CAUSES)

    def check_partition(self) -> None:
        if sum(self.counts[o] for o in OUTCOMES) != self.episodes:
            raise ReportError("outcome counts do not cover the suite")
        if sum(self.counts[c] for c in CAUSES) != self.counts["inconclusive"]:
            raise ReportError("cause counts do not cover the inconclusive runs")
        if sum(self.accuracy.values()) != 100:
            raise ReportError("accuracy percentages do not sum to 100")
        if sum(self.breakdown.values()) != self.accuracy["inconclusive"]:
            raise ReportError("breakdown does not sum to the inconclusive share")
        if sum(self.shares.get(o, Fraction(0)) for o in OUTCOMES) != 1:
            raise ReportError("outcome shares do not sum to 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "label": self.label,
            "episodes": self.episodes,
            "counts": dict(self.counts),
            "accuracy": dict(self.accuracy),
            "inconclusive_breakdown": dict(self.breakdown),
            "path_length_m": {"mean": round(self.path_length_m.mean, 6), "se": round(self.path_length_m.se, 6)},
            "tokens_k": {"mean": round(self.tokens_k.mean, 6), "se": round(self.tokens_k.se, 6)},
            "task_ids": list(self.task_ids),
        }


def compute_metrics(
    results: Iterable[EpisodeResult],
    label: str = "agent",
) -> SuiteReport:
    """Aggregate episode results. Order of ``results`` does not matter."""
    rs = sorted(results, key=lambda r: r.task_id)
    n = len(rs)
    if n == 0:
        raise ReportError("empty suite")
    counts = {k: 0 for k in OUTCOMES + CAUSES}
    for r in rs:
        if r.outcome not in OUTCOMES:
            raise ReportError(f"task {r.task_id}: unknown outcome {r.outcome!r}")
        counts[r.outcome] += 1
        if r.outcome == "inconclusive":
            if r.cause not in CAUSES:
                raise ReportError(f"task {r.task_id}: unknown cause {r.cause!r}")
            counts[r.cause] += 1
    acc = dict(zip(OUTCOMES, apportion([counts[o] for o in OUTCOMES], n)))
    brk = dict(zip(CAUSES, apportion([counts[c] for c in CAUSES], n, acc["inconclusive"])))
    report = SuiteReport(
        label=label,
        episodes=n,
        counts=counts,
        accuracy=acc,
        breakdown=brk,
        path_length_m=mean_se([r.path_length_m for r in rs]),
        tokens_k=mean_se([r.total_tokens / 1000 for r in rs]),
        task_ids=[r.task_id for r in rs],
        shares={o: Fraction(counts[o], n) for o in OUTCOMES},
    )
    report.check_partition()
    return report


TABLE_HEAD = ("Method", "Accuracy (C / I, %)", "Mean Path Length (m)", "Mean Token Usage (x10^3)")
BREAKDOWN_HEAD = ("Method", "Time Limit (%)", "Cost Limit (%)", "Function Call Error (%)")
FOOTER = "Path and token means include inconclusive episodes; token counts from local backends are approximate."


def _table(rows: list[tuple[str, ...]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return [fmt(rows[0]), sep] + [fmt(r) for r in rows[1:]]


def render_report(reports: SuiteReport | Sequence[SuiteReport], fmt: str = "table") -> str:
    """Render one or more reports; output is byte-stable for equal inputs."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r} (expected one of {', '.join(FORMATS)})")
    items = [reports] if isinstance(reports, SuiteReport) else list(reports)
    if not items:
        raise ReportError("empty suite")
    if fmt == "json":
        doc: Any = items[0].to_dict() if len(items) == 1 else [r.to_dict() for r in items]
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    main = [TABLE_HEAD] + [
        (r.label, r.accuracy_text(), r.path_length_m.render(), r.tokens_k.render()) for r in items
    ]
    brk = [BREAKDOWN_HEAD] + [(r.label, *(str(r.breakdown[c]) for c in CAUSES)) for r in items]
    lines = _table(main) + [""] + _table(brk) + ["", FOOTER]
    return "\n".join(lines) + "\n"


def validate_report_json(document: str) -> None:
    import jsonschema

    doc = json.loads(document)
    for d in doc if isinstance(doc, list) else [doc]:
        jsonschema.validate(d, REPORT_SCHEMA)


def synthetic_results(
    success: int, failure: int, causes: dict[str, int] | None = None, *, path_m: float = 0.0, tokens: int = 0
) -> list[EpisodeResult]:
    """Placeholder results with the given outcome counts, for arithmetic checks."""
    out: list[EpisodeResult] = []
    spec = [("success", None)] * success + [("failure", None)] * failure
    for cause, k in (causes or {}).items():
        spec += [("inconclusive", cause)] * k
    for i, (kind, cause) in enumerate(spec):
        out.append(EpisodeResult(f"t{i:04d}", kind, cause, None, "A", path_m, tokens, 0, "0", 0, 0))
    return out
