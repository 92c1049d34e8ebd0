"""Strict parsers for every response grammar the gateway accepts.

Every parser is total over text: it returns structure or raises a typed
ResponseParseError subclass, never anything else.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import MissingMarkerError, ResponseParseError, SchemaError

_FENCE_RE = re.compile(r"^```[A-Za-z0-9_+-]*\s*\n(.*)\n?```\s*$", re.DOTALL)


def strip_fences(text: str) -> str:
    """Remove a wrapping markdown code fence (with optional language tag),
    repeatedly, plus outer whitespace."""
    out = text.strip()
    while True:
        m = _FENCE_RE.match(out)
        if not m:
            return out
        out = m.group(1).strip()


def parse_style_component(
    text: str,
    style_marker: str = "STYLE:",
    component_marker: str = "###COMPONENT:",
) -> tuple[str, str]:
    """Split a reply into (style_code, component_code) on the first
    component marker after the style marker. Both parts are returned
    verbatim; only outer whitespace and code fences are stripped."""
    cleaned = strip_fences(text)
    start = cleaned.find(style_marker)
    if start == -1:
        raise MissingMarkerError(f"response lacks the {style_marker!r} marker")
    after_style = start + len(style_marker)
    split = cleaned.find(component_marker, after_style)
    if split == -1:
        raise MissingMarkerError(f"response lacks the {component_marker!r} separator")
    style = cleaned[after_style:split]
    component = cleaned[split + len(component_marker):]
    return style, component


def serialize_style_component(
    style: str,
    component: str,
    style_marker: str = "STYLE:",
    component_marker: str = "###COMPONENT:",
) -> str:
    return f"{style_marker}{style}{component_marker}{component}"


@dataclass(frozen=True)
class Passed:
    pass


@dataclass(frozen=True)
class Corrected:
    code: str


PASSED = Passed()

_PASSED_RE = re.compile(r"^['\"]?passed\b\.?['\"]?$", re.IGNORECASE)


def parse_verdict_passed(text: str) -> Passed | Corrected:
    """"Passed" (any case, optional period) or the whole remainder as
    corrected code."""
    cleaned = strip_fences(text)
    if not cleaned:
        raise ResponseParseError("empty verdict response")
    if _PASSED_RE.match(cleaned):
        return PASSED
    return Corrected(cleaned)


def parse_verdict_yes_no(text: str) -> bool:
    """True for Yes, False for No; judged on the first token."""
    cleaned = strip_fences(text)
    if not cleaned:
        raise ResponseParseError("empty verdict response")
    first = re.split(r"[\s]", cleaned, maxsplit=1)[0].strip().strip("\"'").rstrip(".,!:;")
    lowered = first.lower()
    if lowered == "yes":
        return True
    if lowered == "no":
        return False
    raise ResponseParseError(f"expected Yes or No, got {first!r}")


SYSTEMS_KEYS = frozenset(
    {"name", "category", "purpose", "code_snippet_usage", "complexity", "features"}
)
ROADMAP_KEYS = frozenset(
    {"title", "objective", "components_logic", "builds_on", "best_practices"}
)

_SCHEMA_KEYS = {"systems": SYSTEMS_KEYS, "roadmap": ROADMAP_KEYS}


def parse_json_array(text: str, schema: str) -> list[dict[str, str]]:
    """Parse a JSON array of records with exact key-name validation
    (case-sensitive; extra or missing keys rejected)."""
    try:
        expected = _SCHEMA_KEYS[schema]
    except KeyError:
        raise SchemaError(f"unknown schema {schema!r}") from None
    cleaned = strip_fences(text)
    try:
        data = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError(f"expected a JSON array, got {type(data).__name__}")
    if not data:
        raise SchemaError("empty array")
    records: list[dict[str, str]] = []
    for idx, item in enumerate(data):
        if not isinstance(item, dict):
            raise SchemaError(f"element {idx} is not an object")
        keys = set(item.keys())
        if keys != expected:
            extra = sorted(keys - expected)
            missing = sorted(expected - keys)
            raise SchemaError(
                f"element {idx} keys do not match {schema} schema"
                + (f"; unexpected: {extra}" if extra else "")
                + (f"; missing: {missing}" if missing else "")
            )
        records.append({k: str(v) for k, v in item.items()})
    return records


def parse_headed_sections(
    text: str, heads: tuple[str, ...] | list[str], divider: str = ""
) -> dict[str, str]:
    """Split a response on exact head lines, in order. When a divider such
    as ``******`` separates sections, divider lines are consumed too."""
    if not heads:
        raise ResponseParseError("expected heads must be non-empty")
    cleaned = strip_fences(text)
    lines = cleaned.splitlines()

    def normalize(line: str) -> str:
        return line.strip().strip("#*").strip()

    positions: list[int] = []
    cursor = 0
    for head in heads:
        found = -1
        for i in range(cursor, len(lines)):
            if normalize(lines[i]) == head:
                found = i
                break
        if found == -1:
            raise MissingMarkerError(f"response missing section head {head!r}")
        positions.append(found)
        cursor = found + 1
    sections: dict[str, str] = {}
    for idx, head in enumerate(heads):
        body_start = positions[idx] + 1
        body_end = positions[idx + 1] if idx + 1 < len(heads) else len(lines)
        body_lines = lines[body_start:body_end]
        if divider:
            body_lines = [l for l in body_lines if l.strip() != divider]
        sections[head] = "\n".join(body_lines).strip()
    return sections


_TASK_HEAD_RE = re.compile(r"^\s*-\s*Task\s+(\d+)\s*$")


def parse_task_list(text: str) -> list[str]:
    """Ordered task descriptions from a ``- Task N`` plan; numbering must
    run 1..T without gaps."""
    cleaned = strip_fences(text)
    lines = cleaned.splitlines()
    marks: list[tuple[int, int]] = []  # (line index, task number)
    for i, line in enumerate(lines):
        m = _TASK_HEAD_RE.match(line)
        if m:
            marks.append((i, int(m.group(1))))
    if not marks:
        raise ResponseParseError("no tasks found in development plan")
    numbers = [num for _, num in marks]
    if numbers != list(range(1, len(numbers) + 1)):
        raise ResponseParseError(
            f"task numbering must be consecutive from 1, got {numbers}"
        )
    tasks: list[str] = []
    for idx, (line_idx, _) in enumerate(marks):
        end = marks[idx + 1][0] if idx + 1 < len(marks) else len(lines)
        body = "\n".join(lines[line_idx + 1 : end]).strip()
        if not body:
            raise ResponseParseError(f"task {idx + 1} has no description")
        tasks.append(body)
    return tasks


def parse_free_text(text: str) -> str:
    return strip_fences(text)


def parse_json_object(text: str) -> dict:
    """Lenient JSON-object parse used by invented agent replies (mock
    inputs, dependency fixes)."""
    cleaned = strip_fences(text)
    try:
        data = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON object: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"expected a JSON object, got {type(data).__name__}")
    return data
