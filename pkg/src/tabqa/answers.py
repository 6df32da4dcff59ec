"""Typed answers: the five task answer types, normalization of raw execution
values, comparison semantics, and the bit-exact rendering used in prediction files."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum
from typing import Optional

from .table_model import decode_cell


class AnswerType(str, Enum):
    BOOLEAN = "boolean"
    CATEGORY = "category"
    NUMBER = "number"
    CATEGORY_LIST = "list[category]"
    NUMBER_LIST = "list[number]"

    @classmethod
    def parse(cls, text: str) -> "AnswerType":
        return cls(text.strip().lower())


LIST_TYPES = {AnswerType.CATEGORY_LIST, AnswerType.NUMBER_LIST}


@dataclass
class Answer:
    answer_type: AnswerType
    value: object
    raw_text: str = ""
    mismatch: bool = False  # set when coercion into the target type failed


class CoercionFailure(Exception):
    pass


_BOOL_LEXICON = {
    "true": True, "false": False, "yes": True, "no": False,
    "y": True, "n": False, "1": True, "0": False,
}


def _coerce_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, (int, float)) and raw in (0, 1):
        return bool(raw)
    if isinstance(raw, str):
        b = _BOOL_LEXICON.get(raw.strip().lower())
        if b is not None:
            return b
    raise CoercionFailure(f"cannot coerce {raw!r} to boolean")


def _coerce_number(raw) -> float:
    if isinstance(raw, bool) or raw is None:
        raise CoercionFailure(f"cannot coerce {raw!r} to number")
    if isinstance(raw, (int, float)):
        if isinstance(raw, float) and not math.isfinite(raw):
            raise CoercionFailure("non-finite number")
        return float(raw)
    if isinstance(raw, str):
        s = raw.strip()
        try:
            v = float(s)
        except ValueError:
            raise CoercionFailure(f"cannot parse {raw!r} as number")
        if not math.isfinite(v):
            raise CoercionFailure("non-finite number")
        return v
    raise CoercionFailure(f"cannot coerce {type(raw).__name__} to number")


def _coerce_category(raw) -> str:
    if raw is None:
        raise CoercionFailure("null is not a category")
    if isinstance(raw, bool):
        return "True" if raw else "False"
    if isinstance(raw, str):
        return raw.strip()
    return _format_number(float(raw)) if isinstance(raw, (int, float)) else str(raw)


def _raw_text(raw) -> str:
    if raw is None:
        return ""
    return str(raw)


def _coerce_list(raw, target: AnswerType) -> list:
    if isinstance(raw, str):
        decoded = decode_cell(raw, hint="ListOfText")
        items = decoded if isinstance(decoded, list) else [decoded]
        if target == AnswerType.CATEGORY_LIST:
            # in rendered answer text a blank element is an empty category,
            # not a missing table cell
            items = ["" if v is None else v for v in items]
    elif isinstance(raw, (list, tuple)):
        items = list(raw)
    elif raw is None:
        raise CoercionFailure("null is not a list")
    else:
        items = [raw]
    elem = _coerce_number if target == AnswerType.NUMBER_LIST else _coerce_category
    return [elem(v) for v in items]


def normalize(raw, target: Optional[AnswerType] = None) -> Answer:
    """Coerce a raw execution value into an Answer.

    With a target type, scalars parse from their text forms and scalars widen
    to singleton lists for list targets. Without one, the type is inferred from
    the value's shape. Coercion failures come back flagged, never raised.
    """
    text = _raw_text(raw)
    if target is None:
        target = _infer_type(raw)
    try:
        if target == AnswerType.BOOLEAN:
            value = _coerce_bool(raw)
        elif target == AnswerType.NUMBER:
            value = _coerce_number(raw)
        elif target == AnswerType.CATEGORY:
            value = _coerce_category(raw)
        else:
            value = _coerce_list(raw, target)
    except CoercionFailure:
        return Answer(target, None, raw_text=text, mismatch=True)
    return Answer(target, value, raw_text=text)


def _infer_type(raw) -> AnswerType:
    if isinstance(raw, bool):
        return AnswerType.BOOLEAN
    if isinstance(raw, (int, float)):
        return AnswerType.NUMBER
    if isinstance(raw, (list, tuple)):
        items = [v for v in raw if v is not None]
        if items and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in items):
            return AnswerType.NUMBER_LIST
        return AnswerType.CATEGORY_LIST
    return AnswerType.CATEGORY


def _round2(x: float) -> Decimal:
    return Decimal(str(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def _num_eq(a: float, b: float) -> bool:
    if a == b:
        return True
    return _round2(a) == _round2(b)


def _cat_key(s: str) -> str:
    return s.strip().casefold()


def compare(pred: Optional[Answer], gold: Answer) -> bool:
    """Type-directed equality. Rounding to 2 decimals is the system's only
    numeric tolerance; list comparison is order-insensitive (multiset)."""
    if pred is None or pred.mismatch:
        return False
    if pred.answer_type != gold.answer_type:
        return False
    t = gold.answer_type
    if t == AnswerType.BOOLEAN:
        return pred.value == gold.value
    if t == AnswerType.CATEGORY:
        return _cat_key(pred.value) == _cat_key(gold.value)
    if t == AnswerType.NUMBER:
        return _num_eq(pred.value, gold.value)
    if t == AnswerType.CATEGORY_LIST:
        return Counter(map(_cat_key, pred.value)) == Counter(map(_cat_key, gold.value))
    # NumberList: multiset of rounded values
    return Counter(map(_round2, pred.value)) == Counter(map(_round2, gold.value))


def _format_number(x: float) -> str:
    d = _round2(x)
    if d == d.to_integral_value():
        return str(int(d))
    return str(d).rstrip("0").rstrip(".")


def render(ans: Optional[Answer]) -> str:
    """Deterministic text form; the contract for prediction files and goldens."""
    if ans is None:
        return ""
    if ans.mismatch:
        return ans.raw_text
    t = ans.answer_type
    if t == AnswerType.BOOLEAN:
        return "True" if ans.value else "False"
    if t == AnswerType.NUMBER:
        return _format_number(ans.value)
    if t == AnswerType.CATEGORY:
        return ans.value
    if t == AnswerType.NUMBER_LIST:
        return "[" + ", ".join(_format_number(v) for v in ans.value) + "]"
    return "[" + ", ".join(repr(v) for v in ans.value) + "]"
