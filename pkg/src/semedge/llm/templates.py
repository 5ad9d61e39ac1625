"""Prompt templates for the generator, discriminator and decomposer roles."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from ..errors import TemplateError

ROLES = ("generator", "discriminator", "decomposer")
TEMPLATE_VERSION = "1"

_PLACEHOLDER = re.compile(r"\{([a-z0-9_]+)\}")

# Discriminator guideline block. The source templates leave this slot
# unspecified; it encodes the three selection criteria used to filter types.
DEFAULT_REQUIREMENTS = (
    "(1) Meaningful: keep an edge type only if it reflects the context in which "
    "edges of this graph are formed. "
    "(2) Feasible: keep an edge type only if it can be decided from the text "
    "attributes of the two endpoint nodes alone. "
    "(3) Distinct: drop edge types that overlap heavily with another proposed "
    "type. "
    "Return the retained edge types as a numbered list in the form "
    "'<index>. <Name>: <Description>'."
)


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    text: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        seen = []
        for name in _PLACEHOLDER.findall(self.text):
            if name not in seen:
                seen.append(name)
        return tuple(seen)

    def render(self, bindings: Mapping[str, str]) -> str:
        return render_prompt(self, bindings)


@lru_cache(maxsize=None)
def load_template(role: str) -> PromptTemplate:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    text = resources.files(__package__).joinpath("templates", f"{role}.txt").read_text(encoding="utf-8")
    return PromptTemplate(role, text)


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Single-pass substitution, so braces inside bound values are left alone."""
    for name in template.placeholders:
        if name not in bindings:
            raise TemplateError(name)

    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.text)


def literal_prefix(template: PromptTemplate, placeholder: str) -> str:
    """Text on the template line that precedes ``{placeholder}``.

    Used by the oracle backend to locate node texts inside rendered prompts.
    """
    marker = "{" + placeholder + "}"
    idx = template.text.index(marker)
    line_start = template.text.rfind("\n", 0, idx) + 1
    return template.text[line_start:idx]


def tail_template(template: PromptTemplate, placeholder: str) -> PromptTemplate:
    marker = "{" + placeholder + "}"
    idx = template.text.index(marker)
    line_start = template.text.rfind("\n", 0, idx) + 1
    return PromptTemplate(template.role, template.text[line_start:])


def escape_node_text(text: str) -> str:
    """Backslash-escape ``\\`` and ``*`` so node text cannot forge template markup.

    Keeps decomposer prompts injective in the pair of node texts.
    """
    return text.replace("\\", "\\\\").replace("*", "\\*")


def decomposer_bindings(relation_listing: str, text_i: str, text_j: str) -> dict[str, str]:
    return {
        "relation_list": "\n" + relation_listing,
        "node1_text": escape_node_text(text_i),
        "node2_text": escape_node_text(text_j),
    }
