import hashlib
import json
import sys

import pytest

from tabqa.sandbox import (
    DEFAULT_TIMEOUT_MS,
    ErrorClass,
    classify_error,
    default_runner_cmd,
    execute,
    parse_reply,
)


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    p = tmp_path_factory.mktemp("tables") / "people.csv"
    p.write_text("Age,City\n30,Lyon\n41,Lyon\n25,Nice\n", encoding="utf-8")
    return p


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


CLASSIFY_CASES = [
    ("SyntaxError", ErrorClass.SYNTAX),
    ("IndentationError", ErrorClass.SYNTAX),
    ("TabError", ErrorClass.SYNTAX),
    ("KeyError", ErrorClass.SCHEMA_MISMATCH),
    ("AttributeError", ErrorClass.SCHEMA_MISMATCH),
    ("IndexError", ErrorClass.SCHEMA_MISMATCH),
    ("ColumnNotFoundError", ErrorClass.SCHEMA_MISMATCH),
    ("MissingKeyFault", ErrorClass.SCHEMA_MISMATCH),
    ("ValueError", ErrorClass.RUNTIME),
    ("ZeroDivisionError", ErrorClass.RUNTIME),
    ("TypeError", ErrorClass.RUNTIME),
    ("NoResultBinding", ErrorClass.RUNTIME),
    ("", ErrorClass.RUNTIME),
]


@pytest.mark.parametrize("name,expected", CLASSIFY_CASES)
def test_classify_error(name, expected):
    assert classify_error(name) is expected


class TestParseReply:
    def test_ok(self):
        r = parse_reply('{"status": "ok", "value": 3, "value_kind": "number", "trace": ""}')
        assert r["value"] == 3

    def test_error(self):
        r = parse_reply('{"status": "error", "error_name": "KeyError", "message": "x", "trace": ""}')
        assert r["error_name"] == "KeyError"

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            "[1, 2]",
            '{"status": "weird"}',
            '{"status": "ok"}',  # missing value_kind
            '{"status": "error", "message": "x"}',  # missing error_name
            '{"status": "error", "error_name": "E"}',  # missing message
        ],
    )
    def test_malformed(self, line):
        with pytest.raises((ValueError, json.JSONDecodeError)):
            parse_reply(line)


class TestExecute:
    def test_success_number(self, table):
        out = execute("result = df['Age'].mean()", table)
        assert out.ok
        assert out.value == pytest.approx(32.0)
        assert out.wall_ms >= 0

    def test_success_list(self, table):
        out = execute("result = sorted(df['City'].unique())", table)
        assert out.ok and out.value == ["Lyon", "Nice"]

    def test_stdout_demoted_to_trace(self, table):
        out = execute("print('debug note')\nresult = 1", table)
        assert out.ok and out.value == 1
        assert "debug note" in out.trace

    def test_schema_mismatch(self, table):
        out = execute("result = df['Agee'].mean()", table)
        assert not out.ok
        assert out.error_class is ErrorClass.SCHEMA_MISMATCH
        assert "Agee" in out.message

    def test_syntax_error(self, table):
        out = execute("result = (df['Age'].mean(", table)
        assert out.error_class is ErrorClass.SYNTAX

    def test_runtime_error(self, table):
        out = execute("result = int('oops')", table)
        assert out.error_class is ErrorClass.RUNTIME

    def test_missing_result_binding(self, table):
        out = execute("x = 1", table)
        assert out.error_class is ErrorClass.RUNTIME
        assert "result" in out.message

    def test_empty_code_short_circuits(self, table):
        out = execute("   \n", table)
        assert out.error_class is ErrorClass.EMPTY_CODE
        assert out.wall_ms == 0  # no child process spawned

    def test_timeout_kills_child(self, table):
        out = execute("while True:\n    pass\nresult = 1", table, timeout_ms=1500)
        assert out.error_class is ErrorClass.TIMEOUT
        assert out.wall_ms >= 1500
        assert out.wall_ms < 1500 + 3000

    def test_table_file_untouched(self, table):
        before = _sha(table)
        execute("import os\nopen('x.txt', 'w').write('junk')\nresult = 1", table)
        execute("result = df.drop(df.index)", table)
        assert _sha(table) == before

    def test_unstartable_runner_is_protocol_error(self, table):
        out = execute("result = 1", table, runner_cmd=["/nonexistent/runner"])
        assert out.error_class is ErrorClass.PROTOCOL

    def test_silent_runner_is_protocol_error(self, table):
        out = execute("result = 1", table, runner_cmd=[sys.executable, "-c", "pass"])
        assert out.error_class is ErrorClass.PROTOCOL
        assert "no reply" in out.message

    def test_garbage_reply_is_protocol_error(self, table):
        cmd = [sys.executable, "-c", "import sys; sys.stdin.read(); print('not json')"]
        out = execute("result = 1", table, runner_cmd=cmd)
        assert out.error_class is ErrorClass.PROTOCOL

    def test_jsonl_format(self, tmp_path):
        p = tmp_path / "t.jsonl"
        p.write_text('{"a": 1}\n{"a": 2}\n', encoding="utf-8")
        out = execute("result = int(df['a'].sum())", p, table_format="tabular-json-lines")
        assert out.ok and out.value == 3


def test_default_runner_cmd_shape():
    cmd = default_runner_cmd()
    assert cmd[0] == sys.executable
    assert cmd[-1].endswith("stub_runner")


def test_default_timeout_value():
    assert DEFAULT_TIMEOUT_MS == 20_000
