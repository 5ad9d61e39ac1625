"""Relation sets and per-edge decompositions, plus their file formats."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError

PROVENANCES = ("queried", "pseudo", "baseline", "fallback")


def canonical_edge(i: int, j: int) -> tuple[int, int]:
    i, j = int(i), int(j)
    return (i, j) if i <= j else (j, i)


@dataclass(frozen=True)
class Relation:
    name: str
    description: str

    def as_line(self) -> str:
        return f"{self.name}: {self.description}"


@dataclass(frozen=True)
class RelationSet:
    relations: tuple[Relation, ...]

    def __post_init__(self):
        rels = tuple(self.relations)
        object.__setattr__(self, "relations", rels)
        if not rels:
            raise ValidationError("relation set is empty")
        seen = set()
        for k, rel in enumerate(rels):
            key = rel.name.strip().lower()
            if not key:
                raise ValidationError(f"relation {k} has an empty name")
            if key in seen:
                raise ValidationError(f"duplicate relation name {rel.name!r}")
            if not rel.description.strip():
                raise ValidationError(f"relation {rel.name!r} has an empty description")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.relations)

    def __iter__(self) -> Iterator[Relation]:
        return iter(self.relations)

    def __getitem__(self, k: int) -> Relation:
        return self.relations[k]

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.relations]

    def enumerated(self) -> str:
        """1-based numbered listing, the form shown to the decomposer."""
        return "\n".join(f"{k}. {r.as_line()}" for k, r in enumerate(self.relations, 1))

    def to_json(self) -> dict:
        return {"relations": [{"name": r.name, "description": r.description} for r in self.relations]}

    @classmethod
    def from_json(cls, obj: dict) -> "RelationSet":
        try:
            items = obj["relations"]
            return cls(tuple(Relation(str(it["name"]), str(it["description"])) for it in items))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed relation set: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RelationSet":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        return cls.from_json(obj)


@dataclass(frozen=True)
class QueryRecord:
    """One decomposer query issued while annotating ``edge`` on behalf of ``node``."""

    node: int
    edge: tuple[int, int]
    cached: bool


@dataclass
class EdgeDecomposition:
    """Mapping from undirected edge to a nonempty set of relation indices.

    Edge keys are stored as ``(min, max)``. ``provenance`` is ``None`` for
    ground-truth files, which carry no provenance field.
    """

    labels: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)
    provenance: dict[tuple[int, int], str | None] = field(default_factory=dict)
    # pseudo-labelled edge -> (anchor node, queried neighbour the labels came from)
    pseudo_source: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)
    queries: list[QueryRecord] = field(default_factory=list)

    def assign(self, edge, relations: Iterable[int], provenance: str | None = None) -> None:
        rels = frozenset(int(r) for r in relations)
        if not rels:
            raise ValidationError(f"empty relation set for edge {tuple(edge)}")
        if provenance is not None and provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {provenance!r}")
        key = canonical_edge(*edge)
        self.labels[key] = rels
        self.provenance[key] = provenance
        self.pseudo_source.pop(key, None)

    def get(self, edge, default=None):
        return self.labels.get(canonical_edge(*edge), default)

    def __getitem__(self, edge) -> frozenset[int]:
        return self.labels[canonical_edge(*edge)]

    def __contains__(self, edge) -> bool:
        return canonical_edge(*edge) in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def edges(self) -> list[tuple[int, int]]:
        return list(self.labels)

    def provenance_of(self, edge) -> str | None:
        return self.provenance.get(canonical_edge(*edge))

    def num_relations(self) -> int:
        """Smallest R compatible with the stored indices."""
        return 1 + max((max(s) for s in self.labels.values()), default=-1)

    def same_labels(self, other: "EdgeDecomposition") -> bool:
        return self.labels == other.labels

    def to_jsonl(self, edge_order: Iterable[tuple[int, int]] | None = None) -> str:
        keys = [canonical_edge(*e) for e in edge_order] if edge_order is not None else list(self.labels)
        lines = []
        for key in keys:
            row = {"edge": list(key), "relations": sorted(self.labels[key])}
            prov = self.provenance.get(key)
            if prov is not None:
                row["provenance"] = prov
            lines.append(json.dumps(row))
        return "".join(line + "\n" for line in lines)

    def save(self, path, edge_order=None) -> None:
        Path(path).write_text(self.to_jsonl(edge_order), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "EdgeDecomposition":
        dec = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                i, j = row["edge"]
                rels = row["relations"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"line {lineno}: {exc}", raw=line) from exc
            dec.assign((i, j), rels, row.get("provenance"))
        return dec

    @classmethod
    def load(cls, path) -> "EdgeDecomposition":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))
