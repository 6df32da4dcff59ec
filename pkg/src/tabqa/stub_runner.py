"""Child-process runner: loads the table into a pandas DataFrame named df,
executes the snippet received on stdin, and reports the `result` binding (or
the failure) as one JSON line on stdout.

Invocation: python -m tabqa.stub_runner TABLE_PATH FORMAT
The snippet's own printed output is captured and demoted into the reply's
trace field so the protocol line stays unambiguous.
"""
from __future__ import annotations

import io
import json
import math
import sys
import traceback
from contextlib import redirect_stdout


def _scalar(v):
    import numpy as np

    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return None if not math.isfinite(f) else f
    if isinstance(v, str):
        return v
    return str(v)


def _serialize(obj):
    """Map a result object to (value, value_kind). Single-element sequences stay
    lists; missing values become null; anything non-serializable becomes text."""
    import numpy as np
    import pandas as pd

    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        return None, "null"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj), "boolean"
    if isinstance(obj, (int, np.integer)):
        return int(obj), "number"
    if isinstance(obj, (float, np.floating)):
        return float(obj), "number"
    if isinstance(obj, str):
        return obj, "text"
    if isinstance(obj, (pd.Series, pd.Index, np.ndarray)):
        return [_scalar(v) for v in list(obj)], "list"
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj, key=repr) if isinstance(obj, (set, frozenset)) else list(obj)
        return [_scalar(v) for v in seq], "list"
    if isinstance(obj, pd.DataFrame):
        if obj.shape[1] == 1:
            return [_scalar(v) for v in obj.iloc[:, 0].tolist()], "list"
        return obj.to_string(), "text"
    scalar = _scalar(obj)
    if scalar is None:
        return None, "null"
    if isinstance(scalar, bool):
        return scalar, "boolean"
    if isinstance(scalar, (int, float)):
        return scalar, "number"
    return str(scalar), "text"


def _load_df(table_path: str, fmt: str):
    import pandas as pd

    if fmt in ("jsonl", "tabular-json-lines"):
        return pd.read_json(table_path, lines=True)
    return pd.read_csv(table_path)


def run_snippet(code: str, table_path: str, fmt: str) -> dict:
    try:
        df = _load_df(table_path, fmt)
    except Exception as exc:
        return {
            "status": "error",
            "error_name": "TableLoadError",
            "message": str(exc),
            "trace": traceback.format_exc(),
        }
    try:
        compiled = compile(code, "<snippet>", "exec")
    except SyntaxError as exc:
        return {
            "status": "error",
            "error_name": type(exc).__name__,
            "message": str(exc),
            "trace": traceback.format_exc(limit=0),
        }
    import pandas as pd

    namespace = {"df": df, "pd": pd}
    captured = io.StringIO()
    try:
        with redirect_stdout(captured):
            exec(compiled, namespace)
    except BaseException as exc:
        return {
            "status": "error",
            "error_name": type(exc).__name__,
            "message": str(exc),
            "trace": traceback.format_exc() + captured.getvalue(),
        }
    if "result" not in namespace:
        return {
            "status": "error",
            "error_name": "NoResultBinding",
            "message": "snippet did not bind a variable named result",
            "trace": captured.getvalue(),
        }
    value, kind = _serialize(namespace["result"])
    return {"status": "ok", "value": value, "value_kind": kind, "trace": captured.getvalue()}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print(
            json.dumps(
                {
                    "status": "error",
                    "error_name": "UsageError",
                    "message": "expected: TABLE_PATH FORMAT",
                    "trace": "",
                }
            )
        )
        return 0
    code = sys.stdin.read()
    reply = run_snippet(code, argv[0], argv[1])
    print(json.dumps(reply, ensure_ascii=False, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
