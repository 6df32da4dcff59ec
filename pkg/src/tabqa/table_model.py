"""In-memory tables: file ingestion, complex-cell decoding, lite sampling.

Cells are plain Python values: ``None``, ``bool``, ``int``, ``float``, ``str``,
plus one level of structure — a ``list`` of scalars or a ``dict`` mapping
strings to scalars. Nesting deeper than one level is never produced.
"""
from __future__ import annotations

import ast
import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

Scalar = Union[None, bool, int, float, str]
CellValue = Union[Scalar, list, dict]

CSV = "csv"
JSONL = "tabular-json-lines"
_FORMAT_ALIASES = {"csv": CSV, "jsonl": JSONL, "tabular-json-lines": JSONL}


class UnreadableFile(Exception):
    """The table file is missing or cannot be parsed at all."""


class MalformedRow(Exception):
    """A data row disagrees with the header (extra or unknown fields)."""

    def __init__(self, row_index: int, detail: str = ""):
        self.row_index = row_index
        msg = f"malformed row {row_index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass
class DecodeStats:
    """Counts decode fallbacks (inputs kept as text after a failed structured parse)."""

    warnings: int = 0

    def warn(self) -> None:
        self.warnings += 1


@dataclass
class Column:
    raw_name: str
    cells: list

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class Table:
    id: str
    columns: list

    @property
    def row_count(self) -> int:
        return len(self.columns[0].cells) if self.columns else 0

    def column(self, raw_name: str) -> Column:
        for col in self.columns:
            if col.raw_name == raw_name:
                return col
        raise KeyError(raw_name)

    @property
    def column_names(self) -> list:
        return [c.raw_name for c in self.columns]


_INT_RE = re.compile(r"[+-]?\d+")
_FLOAT_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_NON_FINITE = {"nan", "inf", "+inf", "-inf", "infinity", "+infinity", "-infinity"}


def parse_scalar(text: str) -> Scalar:
    """Parse one raw field: numbers to int/float, empty to None, else text unchanged."""
    s = text.strip()
    if not s:
        return None
    if s.lower() in _NON_FINITE:
        return None
    if _INT_RE.fullmatch(s):
        try:
            return int(s)
        except ValueError:
            return s
    if _FLOAT_RE.fullmatch(s):
        v = float(s)
        return None if not math.isfinite(v) else v
    return s


def _normalize_ingested(value) -> Scalar:
    if value is None or isinstance(value, (bool, int)):
        return value
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, str):
        return parse_scalar(value)
    # nested JSON structures stay textual; decode_cell handles them later
    return json.dumps(value, ensure_ascii=False)


def load_table(path, format: str = CSV, table_id: Optional[str] = None) -> Table:
    """Load a table from a UTF-8 CSV (header row) or JSON-lines file.

    Raw cell text is preserved except for numeric/empty fields; complex cell
    decoding is deferred to :func:`decode_cell`.
    """
    path = Path(path)
    fmt = _FORMAT_ALIASES.get(format)
    if fmt is None:
        raise UnreadableFile(f"unknown format {format!r}")
    if not path.is_file():
        raise UnreadableFile(f"no such file: {path}")
    tid = table_id if table_id is not None else path.stem
    if fmt == CSV:
        return _load_csv(path, tid)
    return _load_jsonl(path, tid)


def _load_csv(path: Path, table_id: str) -> Table:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise UnreadableFile(f"empty file: {path}")
            columns = [Column(name, []) for name in header]
            for i, row in enumerate(reader, start=1):
                if not row:  # blank line; standard csv convention is to skip
                    continue
                if len(row) != len(header):
                    raise MalformedRow(i, f"{len(row)} fields, header has {len(header)}")
                for col, raw in zip(columns, row):
                    col.cells.append(parse_scalar(raw))
    except OSError as exc:
        raise UnreadableFile(str(exc)) from exc
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{path}: not UTF-8 text") from exc
    return Table(table_id, columns)


def _load_jsonl(path: Path, table_id: str) -> Table:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise UnreadableFile(str(exc)) from exc
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{path}: not UTF-8 text") from exc
    if not lines:
        raise UnreadableFile(f"empty file: {path}")
    records = []
    for i, ln in enumerate(lines, start=1):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            if i == 1:
                raise UnreadableFile(f"{path}: line 1 is not a JSON record") from exc
            raise MalformedRow(i, "not a JSON record") from exc
        if not isinstance(rec, dict):
            raise MalformedRow(i, "record is not an object")
        records.append(rec)
    header = list(records[0].keys())
    known = set(header)
    columns = [Column(name, []) for name in header]
    for i, rec in enumerate(records, start=1):
        extra = set(rec.keys()) - known
        if extra:
            raise MalformedRow(i, f"unknown fields {sorted(extra)}")
        for col in columns:
            col.cells.append(_normalize_ingested(rec.get(col.raw_name)))
    return Table(table_id, columns)


_MAP_PAIR_RE = re.compile(
    r"""(['"])(?P<key>.*?)\1\s*:\s*(?:(['"])(?P<sval>.*?)\3|(?P<nval>[^,}]+))"""
)


def _decode_map(s: str) -> Optional[dict]:
    try:
        obj = ast.literal_eval(s)
    except (ValueError, SyntaxError):
        obj = None
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            key = str(k).strip()
            if not key or key in out:
                return None
            if isinstance(v, (list, dict, tuple, set)):
                return None
            out[key] = _normalize_ingested(v)
        return out
    # tolerant fallback for almost-literal maps (unquoted or mixed values)
    out = {}
    for m in _MAP_PAIR_RE.finditer(s):
        key = m.group("key").strip()
        if not key or key in out:
            return None
        if m.group("sval") is not None:
            out[key] = m.group("sval")
        else:
            out[key] = parse_scalar(m.group("nval"))
    return out or None


def _split_list(s: str, sep: str) -> list:
    return [parse_scalar(part) for part in s.split(sep)]


def _decode_bracket_list(s: str) -> Optional[list]:
    try:
        obj = ast.literal_eval(s)
    except (ValueError, SyntaxError):
        obj = None
    if isinstance(obj, (list, tuple)):
        items = []
        for v in obj:
            if isinstance(v, (list, dict, tuple, set)):
                return None
            items.append(_normalize_ingested(v))
        return items
    inner = s[1:-1].strip()
    if not inner:
        return []
    sep = ";" if ";" in inner else ","
    return [v if isinstance(v, str) else v for v in _split_list(inner, sep)]


# hints accepted from the profiler; kept as plain strings to avoid an import cycle
LIST_HINTS = {"ListOfText", "ListOfNumber"}
_BOOL_LEXICON = {"true": True, "false": False, "yes": True, "no": False}


def decode_cell(
    raw,
    hint: Optional[str] = None,
    separator: Optional[str] = None,
    stats: Optional[DecodeStats] = None,
) -> CellValue:
    """Decode one cell's text form into a CellValue. Total: never raises.

    Bracketless comma-separated text only becomes a list under a list-kind
    hint; a bare comma in prose is not list evidence. Semicolons are treated
    as strong list evidence even without a hint.
    """
    if not isinstance(raw, str):
        return _normalize_ingested(raw)
    s = raw.strip()
    if not s:
        return None
    if s.startswith("{") and s.endswith("}"):
        decoded = _decode_map(s)
        if decoded is not None:
            return decoded
        if stats:
            stats.warn()
        return s
    if s.startswith("[") and s.endswith("]"):
        decoded = _decode_bracket_list(s)
        if decoded is not None:
            return decoded
        if stats:
            stats.warn()
        return s
    if hint in LIST_HINTS:
        sep = separator or (";" if ";" in s else ",")
        return _split_list(s, sep)
    if ";" in s:
        return _split_list(s, ";")
    if hint == "Boolean":
        b = _BOOL_LEXICON.get(s.lower())
        if b is not None:
            return b
    return parse_scalar(s)


def render_scalar(value: Scalar) -> str:
    """Canonical text form of one scalar, used when writing tables back out."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_cell(value: CellValue, separator: str = ";") -> str:
    """Serialize a CellValue back to text; lists join on the given separator."""
    if isinstance(value, list):
        return separator.join(render_scalar(v) for v in value)
    if isinstance(value, dict):
        parts = ", ".join(f"'{k}': {render_scalar(v)}" for k, v in value.items())
        return "{" + parts + "}"
    return render_scalar(value)


def sample_lite(table: Table, max_rows: int) -> Table:
    """First min(row_count, max_rows) rows; column order and names unchanged."""
    if max_rows < 1:
        raise ValueError("max_rows must be >= 1")
    k = min(table.row_count, max_rows)
    return Table(table.id, [Column(c.raw_name, list(c.cells[:k])) for c in table.columns])


def write_csv(table: Table, path, header: Optional[Sequence[str]] = None) -> None:
    """Write a table as UTF-8 CSV, optionally under replacement column names."""
    names = list(header) if header is not None else table.column_names
    if len(names) != len(table.columns):
        raise ValueError("header length mismatch")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(table.row_count):
            writer.writerow([render_cell(col.cells[i]) for col in table.columns])
