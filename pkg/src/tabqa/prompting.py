"""Prompt construction for the three LLM roles, and parsing of model outputs
(selected columns, extracted code). All builders are pure and deterministic;
byte-identical inputs yield byte-identical prompts."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .answers import AnswerType
from .llm_client import RoleTag
from .schema_profiler import ColumnKind, ColumnProfile, TableProfile

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


def render_template(template: str, fields: dict) -> str:
    def sub(m):
        name = m.group(1)
        if name not in fields:
            raise KeyError(f"template placeholder {{{{{name}}}}} has no value")
        return str(fields[name])

    return _PLACEHOLDER.sub(sub, template)


class TemplateSet:
    """Editable prompt templates, one file per (role, part). Placeholders use
    {{name}} syntax; see the shipped templates for the available fields."""

    _FILES = {
        (RoleTag.COLUMN_SELECT, "system"): "column_select.system.txt",
        (RoleTag.COLUMN_SELECT, "user"): "column_select.user.txt",
        (RoleTag.CODE_GEN, "system"): "codegen.system.txt",
        (RoleTag.CODE_GEN, "user"): "codegen.user.txt",
        (RoleTag.CODE_FIX, "system"): "code_fix.system.txt",
        (RoleTag.CODE_FIX, "user"): "code_fix.user.txt",
    }

    def __init__(self, directory=DEFAULT_TEMPLATE_DIR):
        self.directory = Path(directory)
        self._texts = {
            key: (self.directory / name).read_text(encoding="utf-8")
            for key, name in self._FILES.items()
        }

    def get(self, role: RoleTag, part: str) -> str:
        return self._texts[(role, part)]


@dataclass
class PromptBundle:
    role_tag: RoleTag
    system_text: str
    user_text: str


@dataclass
class ColumnSelection:
    selected: list  # ordered subset of sanitized column names
    enhanced: bool = False
    fallback: bool = False  # set when parsing found nothing and all columns were kept


SENTINEL_OPEN = "<columns>"
SENTINEL_CLOSE = "</columns>"


def _profile_line(col: ColumnProfile, enhanced: bool) -> str:
    if not enhanced:
        return f"- {col.sanitized_name}"
    bits = [col.kind.value]
    if col.dominant_separator:
        bits.append(f"separator {col.dominant_separator!r}")
    line = f"- {col.sanitized_name} ({', '.join(bits)})"
    if col.enum_domain:
        line += " values: " + " | ".join(col.enum_domain)
    elif col.sample_values:
        line += " samples: " + "; ".join(col.sample_values)
    return line


def build_column_selection_prompt(
    question: str, profile: TableProfile, enhanced: bool, templates: TemplateSet
) -> PromptBundle:
    if not profile.columns:
        raise ValueError("profile has no columns")
    columns = "\n".join(_profile_line(c, enhanced) for c in profile.columns)
    user = render_template(
        templates.get(RoleTag.COLUMN_SELECT, "user"),
        {
            "question": question,
            "table_id": profile.table_id,
            "row_count": profile.row_count,
            "columns": columns,
        },
    )
    return PromptBundle(
        RoleTag.COLUMN_SELECT, templates.get(RoleTag.COLUMN_SELECT, "system"), user
    )


_LINE_TRIM = re.compile(r"^[\s\-\*\d\.\)]+|[\s,;]+$")


def _name_pattern(name: str):
    return re.compile(
        rf"(?<![A-Za-z0-9_]){re.escape(name)}(?![A-Za-z0-9_])", re.IGNORECASE
    )


def parse_column_selection(model_text: str, profile: TableProfile) -> ColumnSelection:
    """Extract selected column names from a model reply.

    Prefers the sentinel-delimited region; falls back to a line scan of the
    whole text, then to substring matching of known names. An empty result
    falls back to all columns with the fallback flag set."""
    names = profile.sanitized_names
    by_lower = {n.lower(): n for n in names}
    region = model_text
    lo = model_text.find(SENTINEL_OPEN)
    hi = model_text.find(SENTINEL_CLOSE)
    if lo != -1 and hi != -1 and hi > lo:
        region = model_text[lo + len(SENTINEL_OPEN) : hi]
    selected: list = []

    def add(name: str):
        if name not in selected:
            selected.append(name)

    for raw_line in region.splitlines():
        line = _LINE_TRIM.sub("", raw_line).strip().strip("'\"`")
        if not line:
            continue
        hit = by_lower.get(line.lower())
        if hit:
            add(hit)
            continue
        for name in names:  # fuzzy scan: known names mentioned inside the line
            if _name_pattern(name).search(raw_line):
                add(name)
    if not selected:
        return ColumnSelection(selected=list(names), fallback=True)
    return ColumnSelection(selected=selected)


_SHAPE_INSTRUCTIONS = {
    AnswerType.BOOLEAN: "The answer must be a single boolean (True or False).",
    AnswerType.CATEGORY: "The answer must be a single value from the table (a string or scalar), not a list.",
    AnswerType.NUMBER: "The answer must be a single number.",
    AnswerType.CATEGORY_LIST: "The answer must be a Python list of values.",
    AnswerType.NUMBER_LIST: "The answer must be a Python list of numbers.",
}


def build_codegen_prompt(
    question: str,
    profile: TableProfile,
    selection: ColumnSelection,
    templates: TemplateSet,
    expected_type: Optional[AnswerType] = None,
) -> PromptBundle:
    if not selection.selected:
        raise ValueError("selection must be non-empty")
    chosen = [c for c in profile.columns if c.sanitized_name in set(selection.selected)]
    columns = "\n".join(_profile_line(c, enhanced=True) for c in chosen)
    shape = ""
    if expected_type is not None:
        shape = _SHAPE_INSTRUCTIONS[expected_type] + "\n"
    user = render_template(
        templates.get(RoleTag.CODE_GEN, "user"),
        {
            "question": question,
            "table_id": profile.table_id,
            "row_count": profile.row_count,
            "columns": columns,
            "answer_shape": shape,
        },
    )
    return PromptBundle(RoleTag.CODE_GEN, templates.get(RoleTag.CODE_GEN, "system"), user)


NO_CODE_NOTE = "no executable code produced"


def build_fix_prompt(
    question: str, failing_code: str, error, templates: TemplateSet
) -> PromptBundle:
    """error is a failed ExecutionOutcome (sandbox module)."""
    if getattr(error, "ok", False):
        raise ValueError("build_fix_prompt requires a failure outcome")
    code = failing_code if failing_code.strip() else f"# {NO_CODE_NOTE}"
    error_class = error.error_class.value if error.error_class is not None else "Error"
    message = error.message or (
        "execution exceeded the time limit" if error_class == "Timeout" else NO_CODE_NOTE
    )
    user = render_template(
        templates.get(RoleTag.CODE_FIX, "user"),
        {
            "question": question,
            "code": code,
            "error_class": error_class,
            "error_message": message,
        },
    )
    return PromptBundle(RoleTag.CODE_FIX, templates.get(RoleTag.CODE_FIX, "system"), user)


_FENCE = re.compile(r"```[ \t]*[\w+-]*[ \t]*\r?\n(.*?)```", re.DOTALL)

_CODE_LINE_PATTERNS = [
    re.compile(r"^\s*(import|from)\s+\w"),
    re.compile(
        r"^\s*(def|class|for|while|if|elif|else|try|except|finally|with|return"
        r"|pass|break|continue|assert|del|raise|global|nonlocal|lambda)\b"
    ),
    re.compile(r"^\s*#"),
    re.compile(r"^\s*@\w+"),
    re.compile(r"^[^=!<>]*[\w\]\)'\"]\s*(=|\+=|-=|\*=|/=|//=|%=|\*\*=)\s*\S"),
    re.compile(r"^\s*[\w.\[\]'\"]+\(.*\)\s*:?\s*$"),
    re.compile(r"^\s+\S"),  # indented continuation
]


def _looks_like_code(line: str) -> bool:
    return any(p.search(line) for p in _CODE_LINE_PATTERNS)


def extract_code(model_text: str) -> str:
    """Keep only executable lines from a model reply.

    Fenced blocks win when present; otherwise lines are filtered by a code
    heuristic and prose is dropped. An empty result signals no code."""
    fences = _FENCE.findall(model_text)
    if fences:
        return "\n".join(block.strip("\n") for block in fences).strip("\n")
    kept = []
    for line in model_text.splitlines():
        if not line.strip():
            if kept:
                kept.append(line)
            continue
        if _looks_like_code(line):
            kept.append(line.rstrip())
    out = "\n".join(kept).strip("\n")
    return out
