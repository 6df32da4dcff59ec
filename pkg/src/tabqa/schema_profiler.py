"""Preprocessing stage: sanitize column names, infer per-column kinds,
detect enum-like categorical columns, and build the table profile fed to prompts."""
from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .table_model import Column, Table, decode_cell, render_scalar


class ColumnKind(str, Enum):
    BOOLEAN = "Boolean"
    INTEGER = "Integer"
    REAL = "Real"
    TEXT = "Text"
    CATEGORY = "Category"
    DATE_LIKE = "DateLike"
    LIST_OF_TEXT = "ListOfText"
    LIST_OF_NUMBER = "ListOfNumber"
    MAP_LIKE = "MapLike"
    UNKNOWN = "Unknown"


@dataclass
class ColumnProfile:
    raw_name: str
    sanitized_name: str
    kind: ColumnKind
    enum_domain: Optional[list] = None  # sorted for stable serialization
    null_count: int = 0
    distinct_count: int = 0
    sample_values: list = field(default_factory=list)
    dominant_separator: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "raw_name": self.raw_name,
            "sanitized_name": self.sanitized_name,
            "kind": self.kind.value,
            "enum_domain": self.enum_domain,
            "null_count": self.null_count,
            "distinct_count": self.distinct_count,
            "sample_values": self.sample_values,
            "dominant_separator": self.dominant_separator,
        }


@dataclass
class TableProfile:
    table_id: str
    columns: list
    row_count: int

    def column(self, sanitized_name: str) -> ColumnProfile:
        for col in self.columns:
            if col.sanitized_name == sanitized_name:
                return col
        raise KeyError(sanitized_name)

    @property
    def sanitized_names(self) -> list:
        return [c.sanitized_name for c in self.columns]

    def render_text(self) -> str:
        """One JSON object per column; the golden-file serialization contract."""
        lines = [json.dumps({"table_id": self.table_id, "row_count": self.row_count})]
        lines += [json.dumps(c.to_dict(), ensure_ascii=False) for c in self.columns]
        return "\n".join(lines) + "\n"


# Unicode categories stripped from column names: emoji and other symbols,
# modifier symbols (incl. emoji skin tones), format chars (ZWJ, variation
# selectors' neighbours) and unassigned/private/surrogate codepoints.
# Currency and math symbols stay: "Price ($)?" must survive sanitization.
REMOVED_CATEGORIES = frozenset({"So", "Sk", "Cs", "Co", "Cn", "Cf"})


def sanitize_name(raw: str) -> str:
    kept = []
    for ch in raw:
        cat = unicodedata.category(ch)
        if cat in REMOVED_CATEGORIES:
            continue
        if ch.isspace() or cat == "Cc":
            kept.append(" ")
        else:
            kept.append(ch)
    out = " ".join("".join(kept).split())
    return out or "col"


_BOOL_WORDS = {"true", "false"}
_DATE_PATTERNS = [
    re.compile(r"\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2})?([.,]\d+)?(Z|[+-]\d{2}:?\d{2})?)?"),
    re.compile(r"\d{1,2}[/.-]\d{1,2}[/.-]\d{2,4}"),
    re.compile(r"\d{4}[/.]\d{1,2}[/.]\d{1,2}"),
]

NUMERIC_MAJORITY = 0.9
LIST_MAJORITY = 0.6  # separator evidence; single-element cells are tolerated
_MAX_LIST_ELEMENT_LEN = 40


def _is_date_like(s: str) -> bool:
    s = s.strip()
    return any(p.fullmatch(s) for p in _DATE_PATTERNS)


def _comma_cell_is_listy(s: str) -> bool:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) < 2:
        return False
    return all(p and len(p) <= _MAX_LIST_ELEMENT_LEN and ". " not in p for p in parts)


def _list_elements_numeric(cells, sep: Optional[str]) -> bool:
    for s in cells:
        decoded = decode_cell(s, hint="ListOfText", separator=sep)
        if not isinstance(decoded, list):
            return False
        for el in decoded:
            if el is None:
                continue
            if isinstance(el, bool) or not isinstance(el, (int, float)):
                return False
    return True


def infer_kind(column: Column):
    """Classify a column by majority successful parse over non-null cells.

    Returns (ColumnKind, dominant_separator). Category refinement happens in
    profile_table via detect_enum.
    """
    cells = [c for c in column.cells if c is not None]
    if not cells:
        return ColumnKind.UNKNOWN, None
    n = len(cells)

    bools = sum(
        1
        for c in cells
        if isinstance(c, bool) or (isinstance(c, str) and c.strip().lower() in _BOOL_WORDS)
    )
    if bools / n >= NUMERIC_MAJORITY:
        return ColumnKind.BOOLEAN, None

    numbers = [c for c in cells if isinstance(c, (int, float)) and not isinstance(c, bool)]
    if len(numbers) / n >= NUMERIC_MAJORITY:
        if all(isinstance(v, int) for v in numbers):
            return ColumnKind.INTEGER, None
        return ColumnKind.REAL, None

    texts = [c for c in cells if isinstance(c, str)]
    if not texts:
        return ColumnKind.TEXT, None

    stripped = [t.strip() for t in texts if t.strip()]
    if stripped:
        maps = sum(1 for t in stripped if t.startswith("{") and t.endswith("}"))
        if maps / n >= NUMERIC_MAJORITY:
            return ColumnKind.MAP_LIKE, None
        brackets = sum(1 for t in stripped if t.startswith("[") and t.endswith("]"))
        if brackets / n >= NUMERIC_MAJORITY:
            kind = (
                ColumnKind.LIST_OF_NUMBER
                if _list_elements_numeric(stripped, None)
                else ColumnKind.LIST_OF_TEXT
            )
            return kind, None
        semis = sum(1 for t in stripped if ";" in t)
        if semis / n >= LIST_MAJORITY:
            kind = (
                ColumnKind.LIST_OF_NUMBER
                if _list_elements_numeric(stripped, ";")
                else ColumnKind.LIST_OF_TEXT
            )
            return kind, ";"
        commas = sum(1 for t in stripped if "," in t)
        if commas / n >= LIST_MAJORITY and all(
            _comma_cell_is_listy(t) for t in stripped if "," in t
        ):
            kind = (
                ColumnKind.LIST_OF_NUMBER
                if _list_elements_numeric(stripped, ",")
                else ColumnKind.LIST_OF_TEXT
            )
            return kind, ","
        dates = sum(1 for t in stripped if _is_date_like(t))
        if dates / n >= NUMERIC_MAJORITY:
            return ColumnKind.DATE_LIKE, None
    return ColumnKind.TEXT, None


def canonical_key(s: str) -> str:
    """Case/whitespace folding used for enum scheme inference."""
    return " ".join(s.split()).casefold()


DEFAULT_MAX_CARDINALITY = 20
DEFAULT_MAX_RATIO = 0.5


def detect_enum(
    column: Column,
    max_cardinality: int = DEFAULT_MAX_CARDINALITY,
    max_ratio: float = DEFAULT_MAX_RATIO,
):
    """Return the canonicalized value domain for an enum-like text column, else None.

    Canonicalization groups case/whitespace variants; the representative is the
    most frequent surface form, ties broken lexicographically.
    """
    if max_cardinality < 2:
        raise ValueError("max_cardinality must be >= 2")
    nonnull = [c for c in column.cells if isinstance(c, str) and c.strip()]
    if not nonnull:
        return None
    groups: dict = {}
    for s in nonnull:
        groups.setdefault(canonical_key(s), Counter())[s] += 1
    distinct = len(groups)
    if distinct > max_cardinality or distinct / len(nonnull) > max_ratio:
        return None
    domain = set()
    for counter in groups.values():
        top = max(counter.values())
        domain.add(min(k for k, v in counter.items() if v == top))
    return domain


def _render_sample(value) -> str:
    text = render_scalar(value) if not isinstance(value, str) else value
    return text[:40]


def profile_table(table: Table) -> TableProfile:
    """Profile every column: sanitized name, kind, enum domain, null/distinct stats."""
    profiles = []
    used: dict = {}
    for col in table.columns:
        base = sanitize_name(col.raw_name)
        if base in used:
            used[base] += 1
            sanitized = f"{base}_{used[base]}"
        else:
            used[base] = 1
            sanitized = base
        kind, sep = infer_kind(col)
        enum_domain = None
        if kind == ColumnKind.TEXT:
            domain = detect_enum(col)
            if domain is not None:
                kind = ColumnKind.CATEGORY
                enum_domain = sorted(domain)
        nonnull = [c for c in col.cells if c is not None]
        null_count = len(col.cells) - len(nonnull)
        if enum_domain is not None:
            distinct_count = len(enum_domain)
        else:
            distinct_count = len({c if isinstance(c, str) else render_scalar(c) for c in nonnull})
        samples = []
        seen = set()
        for c in nonnull:
            text = _render_sample(c)
            if text not in seen:
                seen.add(text)
                samples.append(text)
            if len(samples) == 5:
                break
        profiles.append(
            ColumnProfile(
                raw_name=col.raw_name,
                sanitized_name=sanitized,
                kind=kind,
                enum_domain=enum_domain,
                null_count=null_count,
                distinct_count=distinct_count,
                sample_values=samples,
                dominant_separator=sep,
            )
        )
    return TableProfile(table_id=table.id, columns=profiles, row_count=table.row_count)
