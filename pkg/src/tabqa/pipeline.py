"""Per-question controller: optional column selection, code generation,
sandboxed execution, and the iterative fix loop. Realizes the three pipeline
configurations (generator only, with column selection, and with enhanced
selection plus the code fixer)."""
from __future__ import annotations

import json
import logging
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import sandbox
from .answers import Answer, AnswerType, normalize, render
from .llm_client import RoleTag
from .prompting import (
    ColumnSelection,
    TemplateSet,
    build_codegen_prompt,
    build_column_selection_prompt,
    build_fix_prompt,
    extract_code,
    parse_column_selection,
)
from .schema_profiler import profile_table
from .table_model import Table, sample_lite, write_csv

log = logging.getLogger(__name__)


class Variant(str, Enum):
    AG = "AG"
    AG_CS = "AG+CS"
    AG_ECS_CF = "AG+ECS+CF"


class Subtask(str, Enum):
    S1 = "S1"
    S2 = "S2"


@dataclass
class PipelineConfig:
    variant: Variant = Variant.AG_ECS_CF
    max_fix_attempts: int = 2
    subtask: Subtask = Subtask.S1
    lite_rows: int = 20
    timeout_ms: int = sandbox.DEFAULT_TIMEOUT_MS
    pass_expected_type: bool = True
    runner_cmd: Optional[list] = None
    table_format: str = "csv"

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.subtask = Subtask(self.subtask)
        if self.lite_rows < 1:
            raise ValueError("lite_rows must be positive")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")
        if self.variant == Variant.AG_ECS_CF:
            if self.max_fix_attempts < 1:
                raise ValueError("AG+ECS+CF requires max_fix_attempts >= 1")
        elif self.max_fix_attempts != 0:
            raise ValueError(f"variant {self.variant.value} requires max_fix_attempts = 0")


@dataclass
class QaTask:
    question: str
    table_id: str
    expected_type: Optional[AnswerType] = None
    gold: Optional[Answer] = None

    def __post_init__(self):
        if not self.question:
            raise ValueError("question must be non-empty")


@dataclass
class Attempt:
    prompt: str  # the user_text sent to the model for this attempt
    code: str
    outcome: sandbox.ExecutionOutcome


@dataclass
class PipelineTrace:
    task: QaTask
    selection: Optional[ColumnSelection]
    attempts: list
    final: Optional[Answer]
    status: str  # "Answered" | "Unanswered"
    executed_rows: Optional[int] = None
    note: str = ""


def _outcome_dict(outcome: sandbox.ExecutionOutcome) -> dict:
    # wall_ms and the traceback are volatile (timing, temp paths) and are
    # deliberately excluded so replayed trace files are bit-identical
    d = {"ok": outcome.ok}
    if outcome.ok:
        d["value"] = outcome.value
    else:
        d["error_class"] = outcome.error_class.value
        d["message"] = outcome.message
    return d


def trace_to_dict(trace: PipelineTrace) -> dict:
    return {
        "table_id": trace.task.table_id,
        "question": trace.task.question,
        "expected_type": trace.task.expected_type.value if trace.task.expected_type else None,
        "selection": (
            {
                "selected": trace.selection.selected,
                "enhanced": trace.selection.enhanced,
                "fallback": trace.selection.fallback,
            }
            if trace.selection is not None
            else None
        ),
        "attempts": [
            {"prompt": a.prompt, "code": a.code, "outcome": _outcome_dict(a.outcome)}
            for a in trace.attempts
        ],
        "final": render(trace.final) if trace.final is not None else None,
        "status": trace.status,
        "executed_rows": trace.executed_rows,
        "note": trace.note,
    }


def prediction_to_dict(trace: PipelineTrace) -> dict:
    return {
        "table_id": trace.task.table_id,
        "question": trace.task.question,
        "answer": render(trace.final),
        "attempts": len(trace.attempts),
        "status": trace.status,
    }


ExecuteFn = Callable[[str, str, int], sandbox.ExecutionOutcome]


def _default_execute(config: PipelineConfig) -> ExecuteFn:
    def run(code: str, table_path: str, timeout_ms: int) -> sandbox.ExecutionOutcome:
        return sandbox.execute(
            code,
            table_path,
            timeout_ms=timeout_ms,
            runner_cmd=config.runner_cmd,
            table_format="csv",
        )

    return run


def answer_question(
    task: QaTask,
    table: Table,
    config: PipelineConfig,
    client,
    templates: TemplateSet,
    execute_fn: Optional[ExecuteFn] = None,
    workdir: Optional[Path] = None,
) -> PipelineTrace:
    """Run one task end to end; every failure is captured in the trace."""
    execute_fn = execute_fn or _default_execute(config)
    profile = profile_table(table)

    selection: Optional[ColumnSelection] = None
    if config.variant != Variant.AG:
        enhanced = config.variant == Variant.AG_ECS_CF
        sel_prompt = build_column_selection_prompt(task.question, profile, enhanced, templates)
        sel_reply = client.complete(_to_request(sel_prompt))
        selection = parse_column_selection(sel_reply.text, profile)
        selection.enhanced = enhanced
    effective = selection or ColumnSelection(selected=profile.sanitized_names)

    exec_table = table
    if config.subtask == Subtask.S2:
        exec_table = sample_lite(table, config.lite_rows)

    expected = task.expected_type if config.pass_expected_type else None
    gen_prompt = build_codegen_prompt(task.question, profile, effective, templates, expected)

    attempts: list = []
    max_attempts = 1 + config.max_fix_attempts
    with tempfile.TemporaryDirectory(prefix="tabqa-table-") as tmp:
        table_path = str(Path(tmp) / f"{_safe_filename(table.id)}.csv")
        write_csv(exec_table, table_path, header=profile.sanitized_names)

        prompt = gen_prompt
        while len(attempts) < max_attempts:
            reply = client.complete(_to_request(prompt))
            code = extract_code(reply.text)
            outcome = execute_fn(code, table_path, config.timeout_ms)
            attempts.append(Attempt(prompt=prompt.user_text, code=code, outcome=outcome))
            if outcome.ok:
                break
            if len(attempts) >= max_attempts:
                break
            prompt = build_fix_prompt(task.question, code, outcome, templates)

    last = attempts[-1].outcome
    if last.ok:
        final = normalize(last.value, expected)
        status = "Answered"
    else:
        final = None
        status = "Unanswered"
    return PipelineTrace(
        task=task,
        selection=selection,
        attempts=attempts,
        final=final,
        status=status,
        executed_rows=exec_table.row_count,
    )


def _to_request(bundle):
    from .llm_client import ChatRequest

    return ChatRequest(
        system_text=bundle.system_text,
        user_text=bundle.user_text,
        role_tag=bundle.role_tag,
    )


def _safe_filename(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name) or "table"


def run_batch(
    tasks: Sequence[QaTask],
    tables: Mapping[str, Table],
    config: PipelineConfig,
    client,
    templates: TemplateSet,
    execute_fn: Optional[ExecuteFn] = None,
) -> list:
    """Answer tasks independently, preserving input order. A missing table
    isolates to its own trace; the batch continues."""
    traces = []
    for task in tasks:
        table = tables.get(task.table_id)
        if table is None:
            log.warning("missing table %r for question %r", task.table_id, task.question)
            traces.append(
                PipelineTrace(
                    task=task,
                    selection=None,
                    attempts=[],
                    final=None,
                    status="Unanswered",
                    note=f"MissingTable({task.table_id})",
                )
            )
            continue
        traces.append(
            answer_question(task, table, config, client, templates, execute_fn=execute_fn)
        )
    return traces


def write_traces(traces, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_to_dict(trace), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_predictions(traces, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(prediction_to_dict(trace), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
