"""Operator entry point: run batches, score predictions, profile tables, and
record transcripts. All commands are deterministic under replay mode."""
from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .answers import Answer, AnswerType, normalize
from .eval_report import AlignmentError, ScoredTask, aggregate, render_table, write_report
from .llm_client import (
    ChatRequest,
    LiveClient,
    RoleTag,
    load_transcript,
    record_transcript,
)
from .pipeline import (
    PipelineConfig,
    QaTask,
    Subtask,
    Variant,
    run_batch,
    write_predictions,
    write_traces,
)
from .prompting import DEFAULT_TEMPLATE_DIR, TemplateSet
from .schema_profiler import profile_table
from .table_model import MalformedRow, Table, UnreadableFile, load_table


def _read_config_file(path) -> dict:
    """Simple key=value config; '#' starts a comment. Secrets come from the
    environment (TABQA_API_KEY), never from this file."""
    out = {}
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{i}: expected key=value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _load_tasks(path) -> list:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"{path}:{i}: bad JSON record: {exc}")
            expected = AnswerType.parse(rec["type"]) if rec.get("type") else None
            gold = None
            if rec.get("gold") is not None and expected is not None:
                gold = normalize(rec["gold"], expected)
            tasks.append(
                QaTask(
                    question=rec["question"],
                    table_id=rec["table_id"],
                    expected_type=expected,
                    gold=gold,
                )
            )
    return tasks


def _load_tables(table_dir: Path, table_ids) -> dict:
    tables = {}
    for tid in table_ids:
        for suffix, fmt in ((".csv", "csv"), (".jsonl", "tabular-json-lines")):
            candidate = table_dir / f"{tid}{suffix}"
            if candidate.is_file():
                tables[tid] = load_table(candidate, fmt, table_id=tid)
                break
    return tables


def _make_run_dir(base: Path, config_digest: str) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    candidate = base / f"run-{stamp}-{config_digest[:8]}"
    n = 1
    while candidate.exists():
        n += 1
        candidate = base / f"run-{stamp}-{config_digest[:8]}-{n}"
    candidate.mkdir(parents=True)
    return candidate


@click.group()
@click.version_option(__version__)
def main():
    """Zero-shot tabular question answering engine."""


@main.command("run")
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--tables", "table_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--replay", "replay_path", type=click.Path(exists=True),
              help="Transcript file; runs model-free in replay mode.")
@click.option("--variant", type=click.Choice([v.value for v in Variant]), default=None)
@click.option("--subtask", type=click.Choice([s.value for s in Subtask]), default=None)
@click.option("--max-fix-attempts", type=int, default=None)
@click.option("--lite-rows", type=int, default=None)
@click.option("--timeout-ms", type=int, default=None)
@click.option("--pass-expected-type/--no-pass-expected-type", default=True)
@click.option("--template-dir", type=click.Path(exists=True), default=None)
def cmd_run(questions_path, table_dir, out_dir, config_path, replay_path, variant,
            subtask, max_fix_attempts, lite_rows, timeout_ms, pass_expected_type,
            template_dir):
    """Answer a batch of questions and write predictions + traces."""
    table_dir = Path(table_dir)
    if not table_dir.is_dir():
        raise click.ClickException(f"table directory does not exist: {table_dir}")
    file_cfg = _read_config_file(config_path) if config_path else {}

    def cfg(key, flag, default, cast=str):
        if flag is not None:
            return flag
        if key in file_cfg:
            return cast(file_cfg[key])
        return default

    pipeline_config = PipelineConfig(
        variant=Variant(cfg("variant", variant, Variant.AG_ECS_CF.value)),
        subtask=Subtask(cfg("subtask", subtask, Subtask.S1.value)),
        max_fix_attempts=_resolved_fix_attempts(file_cfg, variant, subtask, max_fix_attempts),
        lite_rows=cfg("lite_rows", lite_rows, 20, int),
        timeout_ms=cfg("timeout_ms", timeout_ms, 20_000, int),
        pass_expected_type=pass_expected_type,
        runner_cmd=file_cfg.get("runner_cmd", "").split() or None,
    )
    templates = TemplateSet(
        Path(cfg("template_dir", template_dir, DEFAULT_TEMPLATE_DIR))
    )
    if replay_path:
        client = load_transcript(replay_path)
    else:
        endpoint = file_cfg.get("endpoint_url")
        model = file_cfg.get("model")
        if not endpoint or not model:
            raise click.ClickException(
                "live mode needs endpoint_url and model in the config file "
                "(or pass --replay for transcript mode)"
            )
        client = LiveClient(
            endpoint_url=endpoint,
            model=model,
            timeout_s=float(file_cfg.get("request_timeout_s", 120)),
            max_in_flight=int(file_cfg.get("in_flight_cap", 4)),
        )

    tasks = _load_tasks(questions_path)
    tables = _load_tables(table_dir, {t.table_id for t in tasks})

    digest_src = json.dumps(
        {
            "variant": pipeline_config.variant.value,
            "subtask": pipeline_config.subtask.value,
            "max_fix_attempts": pipeline_config.max_fix_attempts,
            "lite_rows": pipeline_config.lite_rows,
            "timeout_ms": pipeline_config.timeout_ms,
            "pass_expected_type": pipeline_config.pass_expected_type,
            "replay": bool(replay_path),
        },
        sort_keys=True,
    )
    run_dir = _make_run_dir(Path(out_dir), hashlib.sha256(digest_src.encode()).hexdigest())
    (run_dir / "run_config.json").write_text(digest_src + "\n", encoding="utf-8")

    traces = run_batch(tasks, tables, pipeline_config, client, templates)
    write_predictions(traces, run_dir / "predictions.jsonl")
    write_traces(traces, run_dir / "traces.jsonl")
    answered = sum(1 for t in traces if t.status == "Answered")
    click.echo(f"run dir: {run_dir}")
    click.echo(f"answered {answered}/{len(traces)} questions")
    return 0


def _resolved_fix_attempts(file_cfg, variant_flag, subtask_flag, flag):
    if flag is not None:
        return flag
    if "max_fix_attempts" in file_cfg:
        return int(file_cfg["max_fix_attempts"])
    v = Variant(variant_flag or file_cfg.get("variant", Variant.AG_ECS_CF.value))
    return 2 if v == Variant.AG_ECS_CF else 0


@main.command("eval")
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True),
              help="Questions file carrying the gold answers.")
@click.option("--out", "report_path", type=click.Path(), default=None)
@click.option("--strict/--no-strict", default=False)
@click.option("--beta", type=float, default=None, help="Baseline reference constant.")
@click.option("--variant", default=None)
@click.option("--subtask", default=None)
def cmd_eval(predictions_path, questions_path, report_path, strict, beta, variant, subtask):
    """Score a predictions file against gold answers and print the accuracy table."""
    tasks = _load_tasks(questions_path)
    golds = {(t.table_id, t.question): t for t in tasks}
    preds = []
    with open(predictions_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                preds.append(json.loads(line))
    if not preds:
        raise click.ClickException(f"empty predictions file: {predictions_path}")
    scored = []
    for rec in preds:
        key = (rec["table_id"], rec["question"])
        task = golds.get(key)
        if task is None or task.gold is None:
            if strict:
                raise click.ClickException(f"no gold answer aligned with {key!r}")
            continue
        predicted = None
        if rec.get("status") == "Answered" and rec.get("answer", "") != "":
            predicted = normalize(rec["answer"], task.expected_type)
        from .answers import compare

        scored.append(
            ScoredTask(
                task=task,
                predicted=predicted,
                correct=compare(predicted, task.gold),
                attempts_used=rec.get("attempts", 0),
            )
        )
    if not scored:
        raise click.ClickException("no predictions aligned with a gold answer")
    report = aggregate(scored, variant=variant, subtask=subtask, baseline_beta=beta)
    click.echo(render_table([report]), nl=False)
    if report_path:
        write_report([report], report_path)
    return 0


@main.command("profile")
@click.option("--table", "table_path", required=True, type=click.Path(exists=True))
@click.option("--format", "table_format", type=click.Choice(["csv", "tabular-json-lines"]),
              default="csv")
def cmd_profile(table_path, table_format):
    """Print the table profile (what the prompts will see)."""
    try:
        table = load_table(table_path, table_format)
    except MalformedRow as exc:
        raise click.ClickException(str(exc))
    except UnreadableFile as exc:
        raise click.ClickException(str(exc))
    click.echo(profile_table(table).render_text(), nl=False)
    return 0


@main.command("record-transcript")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="JSON lines with fields: role, user_text, text.")
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_record_transcript(pairs_path, out_path):
    """Build a replay transcript from recorded (prompt, response) pairs."""
    pairs = []
    with open(pairs_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            req = ChatRequest(
                system_text="", user_text=rec["user_text"], role_tag=RoleTag(rec["role"])
            )
            pairs.append((req, rec["text"]))
    record_transcript(pairs, out_path)
    click.echo(f"wrote {len(pairs)} entries to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
