"""Isolated execution of one generated snippet in a child process, with a hard
timeout and deterministic failure classification.

Wire protocol (shared with the runner harness): the child receives the code on
stdin (UTF-8, closed at end of stream) and the table path + format as
arguments. It replies with exactly one JSON line on stdout:

    {"status": "ok", "value": ..., "value_kind": "...", "trace": "..."}
    {"status": "error", "error_name": "...", "message": "...", "trace": "..."}

Exit code 0 for any properly reported outcome; nonzero only on harness-internal
crashes (mapped to ProtocolError here).
"""
from __future__ import annotations

import json
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence


class ErrorClass(str, Enum):
    SYNTAX = "SyntaxError"
    SCHEMA_MISMATCH = "SchemaMismatch"
    RUNTIME = "RuntimeError"
    TIMEOUT = "Timeout"
    EMPTY_CODE = "EmptyCode"
    PROTOCOL = "ProtocolError"


@dataclass
class ExecutionOutcome:
    ok: bool
    value: object = None
    wall_ms: int = 0
    error_class: Optional[ErrorClass] = None
    message: str = ""
    trace: str = ""

    @classmethod
    def success(cls, value, wall_ms: int = 0, trace: str = "") -> "ExecutionOutcome":
        return cls(ok=True, value=value, wall_ms=wall_ms, trace=trace)

    @classmethod
    def failure(
        cls, error_class: ErrorClass, message: str, trace: str = "", wall_ms: int = 0
    ) -> "ExecutionOutcome":
        return cls(
            ok=False, error_class=error_class, message=message, trace=trace, wall_ms=wall_ms
        )


DEFAULT_TIMEOUT_MS = 20_000
KILL_GRACE_S = 0.5

_SYNTAX_NAMES = {"SyntaxError", "IndentationError", "TabError"}
_LOOKUP_NAMES = {"KeyError", "AttributeError", "IndexError"}
_LOOKUP_HINTS = ("key", "column", "attribute")


def classify_error(error_name: str, message: str = "") -> ErrorClass:
    """Map a runner error name onto the three repairable failure classes:
    parse-stage names -> SyntaxError, lookup failures (key/column/attribute/
    index) -> SchemaMismatch, everything else -> RuntimeError."""
    name = error_name or ""
    if name in _SYNTAX_NAMES:
        return ErrorClass.SYNTAX
    if name in _LOOKUP_NAMES:
        return ErrorClass.SCHEMA_MISMATCH
    lowered = name.lower()
    if any(hint in lowered for hint in _LOOKUP_HINTS):
        return ErrorClass.SCHEMA_MISMATCH
    return ErrorClass.RUNTIME


def parse_reply(line: str) -> dict:
    """Parse one runner reply line; raises ValueError on malformed input."""
    reply = json.loads(line)
    if not isinstance(reply, dict):
        raise ValueError("reply is not an object")
    status = reply.get("status")
    if status == "ok":
        if "value_kind" not in reply:
            raise ValueError("ok reply missing value_kind")
    elif status == "error":
        if not reply.get("error_name") or "message" not in reply:
            raise ValueError("error reply missing error_name/message")
    else:
        raise ValueError(f"bad status {status!r}")
    return reply


def default_runner_cmd() -> list:
    return [sys.executable, "-m", "tabqa.stub_runner"]


def execute(
    code: str,
    table_path,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    runner_cmd: Optional[Sequence[str]] = None,
    table_format: str = "csv",
) -> ExecutionOutcome:
    """Run one snippet against one table file in a fresh child process.

    Total: every failure mode is reported inside the outcome. The child never
    outlives timeout_ms plus a short kill grace."""
    if not code or not code.strip():
        return ExecutionOutcome.failure(ErrorClass.EMPTY_CODE, "")
    cmd = list(runner_cmd) if runner_cmd else default_runner_cmd()
    cmd += [str(table_path), table_format]
    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="tabqa-run-") as workdir:
        try:
            proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=workdir,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            return ExecutionOutcome.failure(
                ErrorClass.PROTOCOL, f"cannot start runner: {exc}"
            )
        try:
            stdout, stderr = proc.communicate(input=code, timeout=timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            try:
                proc.communicate(timeout=KILL_GRACE_S)
            except subprocess.TimeoutExpired:
                pass
            wall_ms = int((time.monotonic() - start) * 1000)
            return ExecutionOutcome.failure(
                ErrorClass.TIMEOUT,
                f"execution exceeded {timeout_ms} ms",
                wall_ms=wall_ms,
            )
    wall_ms = int((time.monotonic() - start) * 1000)
    reply_line = ""
    for line in reversed(stdout.splitlines()):
        if line.strip():
            reply_line = line
            break
    if not reply_line:
        return ExecutionOutcome.failure(
            ErrorClass.PROTOCOL,
            f"runner produced no reply (exit {proc.returncode})",
            trace=stderr[-4000:],
            wall_ms=wall_ms,
        )
    try:
        reply = parse_reply(reply_line)
    except (ValueError, json.JSONDecodeError) as exc:
        return ExecutionOutcome.failure(
            ErrorClass.PROTOCOL,
            f"unparseable runner reply: {exc}",
            trace=stderr[-4000:],
            wall_ms=wall_ms,
        )
    if reply["status"] == "ok":
        return ExecutionOutcome.success(
            reply.get("value"), wall_ms=wall_ms, trace=reply.get("trace", "")
        )
    error_name = reply["error_name"]
    return ExecutionOutcome.failure(
        classify_error(error_name, reply.get("message", "")),
        reply.get("message", "") or error_name,
        trace=reply.get("trace", "") or stderr[-4000:],
        wall_ms=wall_ms,
    )
