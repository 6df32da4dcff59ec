"""Aggregation of per-task correctness into per-type accuracies and the mean mu,
plus the text/structured report tables."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .answers import Answer, AnswerType, compare

log = logging.getLogger(__name__)

TYPE_ORDER = [
    AnswerType.BOOLEAN,
    AnswerType.CATEGORY,
    AnswerType.NUMBER,
    AnswerType.CATEGORY_LIST,
    AnswerType.NUMBER_LIST,
]


class AlignmentError(Exception):
    pass


@dataclass
class ScoredTask:
    task: object  # QaTask
    predicted: Optional[Answer]
    correct: bool
    attempts_used: int = 0


@dataclass
class EvalReport:
    per_type_accuracy: dict  # AnswerType -> float, 2-decimal percentage
    mean_mu: float  # 2-decimal percentage
    counts: dict  # AnswerType -> (correct, total)
    variant: Optional[str] = None
    subtask: Optional[str] = None
    baseline_beta: Optional[float] = None
    mean_mu_raw: Optional[Fraction] = None  # exact mean of the per-type ratios
    untyped_count: int = 0

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "subtask": self.subtask,
            "per_type_accuracy": {t.value: a for t, a in self.per_type_accuracy.items()},
            "mean_mu": self.mean_mu,
            "counts": {t.value: list(c) for t, c in self.counts.items()},
            "baseline_beta": self.baseline_beta,
            "untyped_count": self.untyped_count,
        }


def _round2(x: Fraction) -> float:
    d = (Decimal(x.numerator) / Decimal(x.denominator)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP
    )
    return float(d)


def score(traces, golds: Mapping, strict: bool = False) -> list:
    """Pair each trace with its gold answer (keyed by table_id+question) and
    apply the comparator. Tasks with no gold are skipped unless strict."""
    scored = []
    for trace in traces:
        key = (trace.task.table_id, trace.task.question)
        gold = golds.get(key)
        if gold is None:
            if strict:
                raise AlignmentError(f"no gold answer for {key!r}")
            log.warning("skipping task with no gold answer: %r", key)
            continue
        predicted = trace.final
        scored.append(
            ScoredTask(
                task=trace.task,
                predicted=predicted,
                correct=compare(predicted, gold),
                attempts_used=len(trace.attempts),
            )
        )
    return scored


def aggregate(
    scored: Sequence,
    variant: Optional[str] = None,
    subtask: Optional[str] = None,
    baseline_beta: Optional[float] = None,
) -> EvalReport:
    """Group by answer type; per-type accuracy = 100*correct/total, mu = the
    unweighted mean of the per-type ratios (kept exact internally, rounded
    half-up to 2 decimals for display)."""
    counts: dict = {}
    untyped = 0
    for st in scored:
        t = st.task.expected_type
        if t is None:
            untyped += 1
            continue
        correct, total = counts.get(t, (0, 0))
        counts[t] = (correct + (1 if st.correct else 0), total + 1)
    ordered = {t: counts[t] for t in TYPE_ORDER if t in counts}
    ratios = {t: Fraction(c, n) * 100 for t, (c, n) in ordered.items()}
    per_type = {t: _round2(r) for t, r in ratios.items()}
    if ratios:
        mu_raw = sum(ratios.values(), Fraction(0)) / len(ratios)
    else:
        mu_raw = Fraction(0)
    return EvalReport(
        per_type_accuracy=per_type,
        mean_mu=_round2(mu_raw),
        counts=ordered,
        variant=variant,
        subtask=subtask,
        baseline_beta=baseline_beta,
        mean_mu_raw=mu_raw,
        untyped_count=untyped,
    )


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per (variant, subtask), five type columns
    plus mu (and beta when any report carries one)."""
    if not reports:
        raise ValueError("need at least one report")
    with_beta = any(r.baseline_beta is not None for r in reports)
    headers = ["subtask", "variant"] + [t.value for t in TYPE_ORDER] + ["mu"]
    if with_beta:
        headers.append("beta")
    rows = []
    for r in reports:
        row = [r.subtask or "-", r.variant or "-"]
        for t in TYPE_ORDER:
            acc = r.per_type_accuracy.get(t)
            row.append(f"{acc:.2f}" if acc is not None else "-")
        row.append(f"{r.mean_mu:.2f}")
        if with_beta:
            row.append(f"{r.baseline_beta:.2f}" if r.baseline_beta is not None else "-")
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(cell.rjust(w) for cell, w in zip(row, widths))
    lines = [fmt(headers), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def write_report(reports: Sequence[EvalReport], path) -> None:
    """Machine-readable report: one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
