"""Parsers for generator/discriminator lists and decomposer answers."""
from __future__ import annotations

import re
from typing import Sequence

from ..errors import ParseError

_ITEM = re.compile(r"^\s*(?:\d+\s*[.):]|[-*•])\s+(.*\S)\s*$")
_BOLD = re.compile(r"\*\*|__")
_ANSWER = re.compile(r"answer\s*[:\-]", re.IGNORECASE)
_NUMBER = re.compile(r"(?<![\w.])(\d+)(?![\w.]*\w)")


def _strip_markup(s: str) -> str:
    return _BOLD.sub("", s).strip()


def parse_relation_list(text: str) -> list[tuple[str, str]]:
    """Extract ``(name, description)`` pairs from an enumerated or bulleted list.

    Accepts ``1. Name: Desc``, ``1) Name: Desc``, ``- Name: Desc`` and the
    same with ``**bold**`` names. Indented lines directly after an item are
    treated as continuation of its description.
    """
    items: list[list[str]] = []
    last_was_item = False
    for line in text.splitlines():
        m = _ITEM.match(line)
        if m:
            body = _strip_markup(m.group(1))
            if ":" in body:
                name, desc = body.split(":", 1)
                name, desc = name.strip(), desc.strip()
                if name:
                    items.append([name, desc])
                    last_was_item = True
                    continue
            last_was_item = False
        elif last_was_item and line[:1].isspace() and line.strip():
            items[-1][1] = (items[-1][1] + " " + _strip_markup(line)).strip()
        else:
            last_was_item = False
    if not items:
        raise ParseError("no enumerated relation items found", raw=text)
    return [(name, desc) for name, desc in items]


def _name_pattern(name: str) -> re.Pattern:
    words = [re.escape(w) for w in re.split(r"[\s_]+", name.strip()) if w]
    return re.compile(r"(?<!\w)" + r"[\s_]+".join(words) + r"(?!\w)", re.IGNORECASE)


def parse_decomposition(text: str, num_relations: int, names: Sequence[str] | None = None) -> set[int]:
    """Map a decomposer answer to 0-based relation indices.

    Numbers are read as 1-based relation ids; out-of-range numbers are
    ignored. Relation names match case-insensitively. When an ``Answer:``
    marker is present only the text after the last marker is read.
    """
    if num_relations < 1:
        raise ValueError("num_relations must be >= 1")
    markers = list(_ANSWER.finditer(text))
    segment = text[markers[-1].end():] if markers else text
    segment = _BOLD.sub("", segment)

    found: set[int] = set()
    for m in _NUMBER.finditer(segment):
        k = int(m.group(1))
        if 1 <= k <= num_relations:
            found.add(k - 1)
    for idx, name in enumerate(names or ()):
        if idx < num_relations and name.strip() and _name_pattern(name).search(segment):
            found.add(idx)
    if not found:
        raise ParseError("no relation index or name found in answer", raw=text)
    return found


def format_answer(indices) -> str:
    """Answer grammar produced by the oracle backend: 1-based, comma separated."""
    return "Answer: " + ", ".join(str(k + 1) for k in sorted(indices))
