"""MCQ evaluation harness: dataset loading, accuracy, macro-F1, reports.

Datasets are line-delimited JSON with fields `question`, `options` (five
strings), `gold_index` (1..5), `category` (one of the five CinePile-style
question types), and `video_id`. The engine appends the fixed sixth
insufficiency option at load.

Macro-F1 is computed over the induced six-way label classification.
Labels with zero gold and zero predicted instances are excluded from the
macro mean; otherwise the never-gold, rarely-chosen sixth option would
deflate every score uninformatively. Label-parse failures score as
incorrect (chosen_index recorded as 0) and sit outside the 6x6 confusion
matrix, so matrix row sums equal per-category counts only in their
absence.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Sequence

from .config import VARIANTS
from .errors import (
    BadGoldIndex,
    EmptyRecordSet,
    EngineError,
    MissingField,
    MissingVideo,
    UnknownCategory,
    UnreadableRecord,
)
from .orchestrator import (
    CATEGORIES,
    OPTION_SIX,
    AgentTrace,
    Question,
    trace_to_dict,
)

logger = logging.getLogger("vidqa.eval")

# ablation-table layout: variant rows, category columns
VARIANT_LABELS = {
    "baseline": "Baseline",
    "+summary": "+ Global Summary",
    "+agent": "+ Pre-Retrieval Agent",
    "full": "+ Rethink Loop (full)",
}
REPORT_CATEGORIES = (
    "Theme Exploration",
    "Narrative and Plot Analysis",
    "Character and Relationship Dynamics",
    "Setting and Technical Analysis",
    "Temporal",
)


@dataclass
class EvalRecord:
    question_id: str
    category: str
    variant: str
    chosen_index: int  # 0 marks a label-parse failure
    gold_index: int
    correct: bool
    wall_time_ms: float = 0.0
    backend_call_count: int = 0

    def __post_init__(self) -> None:
        if self.correct != (self.chosen_index == self.gold_index):
            raise ValueError("correct flag disagrees with indices")


def load_dataset(source: str | Path | IO[str]) -> list[Question]:
    """Load and validate a question file, appending the sixth option."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    questions: list[Question] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableRecord(f"line {lineno}: {exc.msg}") from exc
        for fname in ("question", "options", "gold_index", "category"):
            if fname not in obj:
                raise MissingField(f"line {lineno}: missing {fname!r}")
        if not obj.get("video_id"):
            raise MissingVideo(f"line {lineno}: missing video_id")
        options = obj["options"]
        if not isinstance(options, list) or len(options) != 5:
            raise UnreadableRecord(f"line {lineno}: options must be 5 strings")
        gold = obj["gold_index"]
        if not isinstance(gold, int) or not 1 <= gold <= 5:
            raise BadGoldIndex(f"line {lineno}: gold_index {gold!r} outside 1..5")
        category = obj["category"]
        if category not in CATEGORIES:
            raise UnknownCategory(f"line {lineno}: {category!r}")
        questions.append(
            Question(
                question_id=str(obj.get("question_id", f"q{lineno}")),
                text=obj["question"],
                options=tuple(options) + (OPTION_SIX,),
                gold_index=gold,
                video_id=obj["video_id"],
                category=category,
            )
        )
    return questions


def accuracy(records: Sequence[EvalRecord]) -> float:
    """Percent correct over all records (parse failures count as wrong)."""
    if not records:
        raise EmptyRecordSet("accuracy over zero records")
    return 100.0 * sum(r.correct for r in records) / len(records)


def confusion_matrix(records: Sequence[EvalRecord]) -> list[list[int]]:
    """6x6 gold-by-chosen counts; parse failures (chosen 0) are excluded."""
    matrix = [[0] * 6 for _ in range(6)]
    for r in records:
        if 1 <= r.chosen_index <= 6:
            matrix[r.gold_index - 1][r.chosen_index - 1] += 1
    return matrix


def macro_f1(records: Sequence[EvalRecord]) -> float:
    """Mean per-label F1 over labels with any gold or predicted instance."""
    if not records:
        raise EmptyRecordSet("macro-F1 over zero records")
    matrix = confusion_matrix(records)
    scores: list[float] = []
    for label in range(6):
        gold_count = sum(matrix[label])
        pred_count = sum(matrix[g][label] for g in range(6))
        if gold_count == 0 and pred_count == 0:
            continue
        tp = matrix[label][label]
        denom = 2 * tp + (pred_count - tp) + (gold_count - tp)
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores) if scores else 0.0


@dataclass
class EvalCell:
    accuracy_pct: float
    macro_f1: float
    count: int
    confusion: list[list[int]]


@dataclass
class EvalReport:
    variants: list[str]
    categories: list[str]
    cells: dict[tuple[str, str], EvalCell]           # (variant, category)
    overall: dict[str, EvalCell]                      # per variant
    records: list[EvalRecord]
    mean_backend_calls: dict[str, float]
    mean_wall_time_ms: dict[str, float]               # volatile; excluded from files
    failures: list[tuple[str, str, str]] = field(default_factory=list)
    traces: list[AgentTrace] = field(default_factory=list)

    def to_json(self) -> str:
        """Deterministic machine-readable report (no timing fields)."""
        payload = {
            "variants": self.variants,
            "categories": self.categories,
            "cells": {
                f"{variant}|{category}": {
                    "accuracy_pct": round(cell.accuracy_pct, 6),
                    "macro_f1": round(cell.macro_f1, 6),
                    "count": cell.count,
                    "confusion": cell.confusion,
                }
                for (variant, category), cell in sorted(self.cells.items())
            },
            "overall": {
                variant: {
                    "accuracy_pct": round(cell.accuracy_pct, 6),
                    "macro_f1": round(cell.macro_f1, 6),
                    "count": cell.count,
                    "confusion": cell.confusion,
                }
                for variant, cell in sorted(self.overall.items())
            },
            "mean_backend_calls": {
                k: round(v, 6) for k, v in sorted(self.mean_backend_calls.items())
            },
            "records": [
                {
                    "question_id": r.question_id,
                    "category": r.category,
                    "variant": r.variant,
                    "chosen_index": r.chosen_index,
                    "gold_index": r.gold_index,
                    "correct": r.correct,
                }
                for r in self.records
            ],
            "failures": [list(f) for f in self.failures],
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"

    def table(self, metric: str = "accuracy") -> str:
        """Ablation table: variant rows by category columns."""
        header = ["System Variant"] + list(self.categories)
        rows = [header]
        for variant in self.variants:
            row = [VARIANT_LABELS.get(variant, variant)]
            for category in self.categories:
                cell = self.cells.get((variant, category))
                if cell is None:
                    row.append("-")
                elif metric == "accuracy":
                    row.append(f"{cell.accuracy_pct:.1f}")
                else:
                    row.append(f"{cell.macro_f1:.3f}")
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def render_text(self) -> str:
        parts = [
            "Accuracy (%) by system variant and question type",
            self.table("accuracy"),
            "",
            "Macro-F1 by system variant and question type",
            self.table("f1"),
            "",
            "Mean chat calls per question: "
            + ", ".join(
                f"{VARIANT_LABELS.get(v, v)}={self.mean_backend_calls[v]:.2f}"
                for v in self.variants
            ),
        ]
        return "\n".join(parts) + "\n"


def _aggregate(
    records: list[EvalRecord],
    variants: Sequence[str],
    failures: list[tuple[str, str, str]],
    mean_wall: dict[str, float],
) -> EvalReport:
    categories = [
        c for c in REPORT_CATEGORIES if any(r.category == c for r in records)
    ] or list(REPORT_CATEGORIES)
    cells: dict[tuple[str, str], EvalCell] = {}
    overall: dict[str, EvalCell] = {}
    mean_calls: dict[str, float] = {}
    for variant in variants:
        vrecords = [r for r in records if r.variant == variant]
        if vrecords:
            overall[variant] = EvalCell(
                accuracy(vrecords), macro_f1(vrecords), len(vrecords),
                confusion_matrix(vrecords),
            )
            mean_calls[variant] = sum(r.backend_call_count for r in vrecords) / len(
                vrecords
            )
        for category in categories:
            sub = [r for r in vrecords if r.category == category]
            if sub:
                cells[(variant, category)] = EvalCell(
                    accuracy(sub), macro_f1(sub), len(sub), confusion_matrix(sub)
                )
    return EvalReport(
        variants=list(variants),
        categories=categories,
        cells=cells,
        overall=overall,
        records=records,
        mean_backend_calls=mean_calls,
        mean_wall_time_ms=mean_wall,
        failures=failures,
    )


def run_eval(
    questions: Sequence[Question],
    variants: Sequence[str],
    answer_fn: Callable[[Question, str], tuple[object, AgentTrace]],
    max_workers: int = 4,
) -> EvalReport:
    """Answer every (question, variant) cell and aggregate the report.

    `answer_fn(question, variant)` is the engine closure (see cli.py for
    the standard wiring over a store and backend). Cells run concurrently;
    aggregation is a deterministic fold sorted by (variant order,
    question_id). A single cell failure is recorded as an incorrect answer
    plus a failure note; it never aborts the run.
    """
    for variant in variants:
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    cells = [(variant, q) for variant in variants for q in questions]
    results: dict[tuple[str, str], EvalRecord] = {}
    traces: dict[tuple[str, str], AgentTrace] = {}
    failures: list[tuple[str, str, str]] = []

    def one(cell: tuple[str, Question]):
        variant, question = cell
        started = time.perf_counter()
        try:
            record, trace = answer_fn(question, variant)
            chosen = record.chosen_index
            wall = (time.perf_counter() - started) * 1000
            return (
                (variant, question.question_id),
                EvalRecord(
                    question_id=question.question_id,
                    category=question.category,
                    variant=variant,
                    chosen_index=chosen,
                    gold_index=question.gold_index,
                    correct=chosen == question.gold_index,
                    wall_time_ms=wall,
                    backend_call_count=trace.backend_call_count,
                ),
                trace,
                None,
            )
        except EngineError as exc:
            wall = (time.perf_counter() - started) * 1000
            logger.warning("(%s, %s) failed: %s", question.question_id, variant, exc)
            return (
                (variant, question.question_id),
                EvalRecord(
                    question_id=question.question_id,
                    category=question.category,
                    variant=variant,
                    chosen_index=0,
                    gold_index=question.gold_index,
                    correct=False,
                    wall_time_ms=wall,
                ),
                None,
                f"{type(exc).__name__}: {exc}",
            )

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(one, cells))

    for key, record, trace, error in outcomes:
        results[key] = record
        if trace is not None:
            traces[key] = trace
        if error is not None:
            failures.append((key[1], key[0], error))

    variant_rank = {v: i for i, v in enumerate(variants)}
    ordered_keys = sorted(results, key=lambda k: (variant_rank[k[0]], k[1]))
    records = [results[k] for k in ordered_keys]
    failures.sort(key=lambda f: (variant_rank[f[1]], f[0]))

    mean_wall: dict[str, float] = {}
    for variant in variants:
        vrecords = [r for r in records if r.variant == variant]
        if vrecords:
            mean_wall[variant] = sum(r.wall_time_ms for r in vrecords) / len(vrecords)

    report = _aggregate(records, variants, failures, mean_wall)
    report.traces = [traces[k] for k in ordered_keys if k in traces]
    return report


def traces_to_jsonl(traces: Sequence[AgentTrace]) -> str:
    """One line-delimited record per question trace (audit form)."""
    return "".join(json.dumps(trace_to_dict(t), sort_keys=False) + "\n" for t in traces)
