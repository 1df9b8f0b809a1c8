"""The ``<answer>`` contract: a JSON list of {Position, ErrorType} objects."""

from __future__ import annotations

import json
import re
from typing import Iterable

from tubetopo.types import Anomaly, AnomalyType

_TAG = re.compile(r"<(/?)answer>")
_KEYS = {"Position", "ErrorType"}


class FormatError(ValueError):
    """Response text does not satisfy the answer contract."""


def _payload(text: str) -> str:
    tags = list(_TAG.finditer(text))
    if not tags:
        raise FormatError("missing <answer> tags")
    depth = 0
    for m in tags:
        depth += -1 if m.group(1) else 1
        if depth not in (0, 1):
            raise FormatError("unbalanced <answer> tags")
    if depth:
        raise FormatError("unbalanced <answer> tags")
    open_, close = tags[-2], tags[-1]
    return text[open_.end() : close.start()]


def _coord(v, i: int, k: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"item {i}: Position[{k}] is not an integer")
    if not 0 <= v <= 1000:
        raise FormatError(f"item {i}: Position[{k}]={v} outside [0, 1000]")
    return v


def parse_answer(text: str) -> list[Anomaly]:
    """Anomalies from the last ``<answer>...</answer>`` pair, in response order."""
    body = _payload(text)
    try:
        items = json.loads(body)
    except json.JSONDecodeError as exc:
        raise FormatError(f"answer is not valid JSON: {exc.msg}") from None
    if not isinstance(items, list):
        raise FormatError("answer is not a list")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise FormatError(f"item {i}: not an object")
        if set(item) != _KEYS:
            raise FormatError(f"item {i}: keys must be exactly Position and ErrorType")
        pos = item["Position"]
        if not isinstance(pos, list) or len(pos) != 4:
            raise FormatError(f"item {i}: Position must list four integers")
        x1, y1, x2, y2 = (_coord(v, i, k) for k, v in enumerate(pos))
        if x1 >= x2 or y1 >= y2:
            raise FormatError(f"item {i}: empty box {pos}")
        label = item["ErrorType"]
        if not isinstance(label, str):
            raise FormatError(f"item {i}: ErrorType is not a string")
        try:
            kind = AnomalyType.from_label(label)
        except ValueError:
            raise FormatError(f"item {i}: unknown ErrorType {label!r}") from None
        out.append(Anomaly((x1, y1, x2, y2), kind))
    return out


def format_reward(text: str) -> int:
    try:
        parse_answer(text)
    except FormatError:
        return 0
    return 1


def render_answer(anomalies: Iterable[Anomaly]) -> str:
    return "<answer>" + json.dumps([a.to_dict() for a in anomalies]) + "</answer>"
