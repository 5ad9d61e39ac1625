"""Text-attributed graph model, JSON I/O, splits and relation substructures."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CoverageError, MissingLabelsError, ParseError, ValidationError
from .relations import EdgeDecomposition, canonical_edge

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraphMeta:
    description: str = ""
    node_kind: str = ""
    edge_rule: str = ""
    class_names: tuple[str, ...] = ()

    def composition(self) -> str:
        """Plain-language summary of the graph used to fill prompt slots."""
        parts = [self.description.strip()] if self.description.strip() else []
        if self.node_kind:
            parts.append(f"Nodes represent {self.node_kind}.")
        if self.edge_rule:
            parts.append(f"Edges indicate {self.edge_rule}.")
        if self.class_names:
            parts.append("The predefined categories are " + ", ".join(self.class_names) + ".")
        return " ".join(parts)


@dataclass(frozen=True)
class TextAttributedGraph:
    texts: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    labels: tuple[int | None, ...] | None = None
    meta: GraphMeta = field(default_factory=GraphMeta)

    def __post_init__(self):
        texts = tuple(str(t) for t in self.texts)
        object.__setattr__(self, "texts", texts)
        n = len(texts)

        edges, seen = [], set()
        for k, e in enumerate(self.edges):
            try:
                i, j = (int(v) for v in e)
            except (TypeError, ValueError):
                raise ValidationError(f"edge {k} is not a pair of integers")
            if i == j:
                raise ValidationError(f"self-loop at edge {k}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"endpoint out of range at edge {k}: {(i, j)} with N={n}")
            key = canonical_edge(i, j)
            if key in seen:
                logger.warning("dropping duplicate edge %s at index %d", key, k)
                continue
            seen.add(key)
            edges.append(key)
        object.__setattr__(self, "edges", tuple(edges))

        if self.labels is not None:
            labels = tuple(None if y is None else int(y) for y in self.labels)
            if len(labels) != n:
                raise ValidationError(f"labels has length {len(labels)}, expected {n}")
            if all(y is None for y in labels):
                labels = None
            k_max = len(self.meta.class_names)
            for idx, y in enumerate(labels or ()):
                if y is None:
                    continue
                if y < 0 or (k_max and y >= k_max):
                    raise ValidationError(f"label out of range at node {idx}: {y}")
            object.__setattr__(self, "labels", labels)
        meta = self.meta
        if not isinstance(meta.class_names, tuple):
            object.__setattr__(self, "meta", GraphMeta(meta.description, meta.node_kind,
                                                       meta.edge_rule, tuple(meta.class_names)))

    @property
    def node_count(self) -> int:
        return len(self.texts)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_classes(self) -> int:
        if self.meta.class_names:
            return len(self.meta.class_names)
        known = [y for y in (self.labels or ()) if y is not None]
        return max(known) + 1 if known else 0

    @property
    def has_labels(self) -> bool:
        return self.labels is not None and any(y is not None for y in self.labels)

    def labeled_nodes(self) -> list[int]:
        if self.labels is None:
            return []
        return [i for i, y in enumerate(self.labels) if y is not None]

    def label_array(self, fill: int = -1) -> np.ndarray:
        if self.labels is None:
            return np.full(self.node_count, fill, dtype=np.int64)
        return np.array([fill if y is None else y for y in self.labels], dtype=np.int64)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]

    def directed_edges(self) -> np.ndarray:
        """Symmetrized edge array of shape (2M, 2), rows (src, dst)."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.asarray(self.edges, dtype=np.int64)
        return np.concatenate([e, e[:, ::-1]], axis=0)

    def to_json(self) -> dict:
        labels = self.labels if self.labels is not None else (None,) * self.node_count
        return {
            "meta": {
                "description": self.meta.description,
                "node_kind": self.meta.node_kind,
                "edge_rule": self.meta.edge_rule,
                "class_names": list(self.meta.class_names),
            },
            "nodes": [{"id": i, "text": t, "label": y} for i, (t, y) in enumerate(zip(self.texts, labels))],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_json(cls, obj) -> "TextAttributedGraph":
        if not isinstance(obj, dict):
            raise ValidationError("graph document must be a JSON object")
        for key in ("meta", "nodes", "edges"):
            if key not in obj:
                raise ValidationError(f"missing field {key!r}")
        m = obj["meta"]
        meta = GraphMeta(
            description=str(m.get("description", "")),
            node_kind=str(m.get("node_kind", "")),
            edge_rule=str(m.get("edge_rule", "")),
            class_names=tuple(str(c) for c in m.get("class_names", [])),
        )
        nodes = obj["nodes"]
        ids = [nd.get("id") for nd in nodes]
        if ids != list(range(len(nodes))):
            bad = next(k for k, v in enumerate(ids) if v != k)
            raise ValidationError(f"node ids must be 0..N-1 in order; node {bad} has id {ids[bad]!r}")
        for k, nd in enumerate(nodes):
            if not isinstance(nd.get("text"), str):
                raise ValidationError(f"node {k} text must be a string")
            lab = nd.get("label")
            if lab is not None and (isinstance(lab, bool) or not isinstance(lab, int)):
                raise ValidationError(f"node {k} label must be an integer or null")
        labels = [nd.get("label") for nd in nodes]
        return cls(
            texts=tuple(nd["text"] for nd in nodes),
            edges=tuple(tuple(e) for e in obj["edges"]),
            labels=None if all(y is None for y in labels) else tuple(labels),
            meta=meta,
        )


def load_graph(path) -> TextAttributedGraph:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return TextAttributedGraph.from_json(obj)


def save_graph(graph: TextAttributedGraph, path) -> None:
    # OSError from an unwritable path propagates to the caller.
    Path(path).write_text(json.dumps(graph.to_json(), ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Split:
    seed: int
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def part(self, name: str) -> tuple[int, ...]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]

    def to_json(self) -> dict:
        return {"seed": self.seed, "train": list(self.train), "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_json(cls, obj) -> "Split":
        return cls(int(obj["seed"]), tuple(obj["train"]), tuple(obj["val"]), tuple(obj["test"]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_split(graph: TextAttributedGraph, seed: int, fractions=(0.6, 0.2, 0.2)) -> Split:
    """Uniform random train/val/test partition of the labelled nodes."""
    nodes = graph.labeled_nodes()
    if not nodes:
        raise MissingLabelsError("graph has no labelled nodes")
    rng = np.random.default_rng(seed)
    order = [nodes[k] for k in rng.permutation(len(nodes))]
    n_train = _round_half_up(fractions[0] * len(nodes))
    n_val = min(_round_half_up(fractions[1] * len(nodes)), len(nodes) - n_train)
    return Split(
        seed=int(seed),
        train=tuple(sorted(order[:n_train])),
        val=tuple(sorted(order[n_train:n_train + n_val])),
        test=tuple(sorted(order[n_train + n_val:])),
    )


@dataclass(frozen=True)
class RelationSubstructures:
    num_relations: int
    edges_by_relation: tuple[tuple[tuple[int, int], ...], ...]

    def as_arrays(self) -> list[np.ndarray]:
        return [np.asarray(er, dtype=np.int64).reshape(-1, 2) for er in self.edges_by_relation]


def _checked_labels(graph, decomposition: EdgeDecomposition, num_relations: int):
    for k, edge in enumerate(graph.edges):
        rels = decomposition.get(edge)
        if not rels:
            raise CoverageError(f"edge {k} {edge} has no relation assignment")
        bad = [r for r in rels if r < 0 or r >= num_relations]
        if bad:
            raise IndexError(f"relation index {bad[0]} out of range for R={num_relations} at edge {edge}")
        yield edge, sorted(rels)


def build_substructures(graph, decomposition: EdgeDecomposition, num_relations: int) -> RelationSubstructures:
    """Split the symmetrized edge set into one directed edge list per relation.

    A multi-labelled edge lands in every matching list.
    """
    if num_relations < 1:
        raise ValueError("num_relations must be >= 1")
    per_rel: list[list[tuple[int, int]]] = [[] for _ in range(num_relations)]
    for (i, j), rels in _checked_labels(graph, decomposition, num_relations):
        for r in rels:
            per_rel[r].append((i, j))
            per_rel[r].append((j, i))
    return RelationSubstructures(num_relations, tuple(tuple(er) for er in per_rel))


def duplicate_for_edge_features(graph, decomposition: EdgeDecomposition,
                                num_relations: int | None = None) -> list[tuple[tuple[int, int], int]]:
    """One ``((src, dst), relation)`` entry per direction and assigned relation."""
    if num_relations is None:
        num_relations = max(decomposition.num_relations(), 1)
    out = []
    for (i, j), rels in _checked_labels(graph, decomposition, num_relations):
        for r in rels:
            out.append(((i, j), r))
            out.append(((j, i), r))
    return out


# --- synthetic planted-relation graphs -------------------------------------

TOKENS_PER_NODE = 20
CLASS_VOCAB = 5
DISTRACTOR_VOCAB = 50


@dataclass(frozen=True)
class SynthConfig:
    n: int = 300
    k: int = 3
    r: int = 2
    degree: int = 5
    p_text: float = 0.7
    seed: int = 0

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.r != 2:
            raise ConfigError("only r=2 planted relations are supported")
        if self.n < 50:
            raise ConfigError("n must be >= 50")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if not 0.0 <= self.p_text <= 1.0:
            raise ConfigError("p_text must lie in [0, 1]")


def _node_text(rng: np.random.Generator, y: int, p_text: float) -> str:
    words = []
    for _ in range(TOKENS_PER_NODE):
        if rng.random() < 1.0 - p_text:
            words.append(f"class{y}_w{rng.integers(CLASS_VOCAB)}")
        else:
            words.append(f"word{rng.integers(DISTRACTOR_VOCAB)}")
    return " ".join(words)


def _sample_pairs(rng, count, pick, taken, max_pairs, what):
    if count > max_pairs:
        raise ConfigError(f"cannot place {count} {what} edges; only {max_pairs} distinct pairs exist")
    out = []
    while len(out) < count:
        i, j = pick()
        key = canonical_edge(i, j)
        if i == j or key in taken:
            continue
        taken.add(key)
        out.append(key)
    return out


def synth_planted_graph(config: SynthConfig) -> tuple[TextAttributedGraph, EdgeDecomposition]:
    """Planted graph with a homophilous relation 0 and a class-shifting relation 1.

    Relation 0 joins two random nodes of the same class; relation 1 joins a
    class-y node to a class-(y+1 mod K) node. Each relation gets
    ``round(n * degree / 2)`` edges so the per-relation mean degree is
    ``degree``.
    """
    config.validate()
    n, k = config.n, config.k
    rng = np.random.default_rng(config.seed)
    labels = rng.permutation(np.arange(n) % k)
    members = [np.flatnonzero(labels == c) for c in range(k)]
    per_rel = _round_half_up(n * config.degree / 2)

    def pick_same():
        i = int(rng.integers(n))
        pool = members[labels[i]]
        return i, int(pool[rng.integers(len(pool))])

    def pick_shift():
        i = int(rng.integers(n))
        pool = members[(labels[i] + 1) % k]
        return i, int(pool[rng.integers(len(pool))])

    sizes = [len(m) for m in members]
    same_cap = sum(s * (s - 1) // 2 for s in sizes)
    shift_cap = sum(sizes[c] * sizes[(c + 1) % k] for c in range(k)) // (2 if k == 2 else 1)
    taken: set = set()
    rel0 = _sample_pairs(rng, per_rel, pick_same, taken, same_cap, "same-class")
    rel1 = _sample_pairs(rng, per_rel, pick_shift, taken, shift_cap, "class-shift")

    texts = tuple(_node_text(rng, int(labels[i]), config.p_text) for i in range(n))
    tagged = [(e, 0) for e in rel0] + [(e, 1) for e in rel1]
    order = rng.permutation(len(tagged))
    tagged = [tagged[t] for t in order]

    meta = GraphMeta(
        description=f"A synthetic graph of {n} short token documents drawn from {k} topics.",
        node_kind="documents made of topic words and shared filler words",
        edge_rule="either a shared topic or a link from one topic to the next topic in a fixed cycle",
        class_names=tuple(f"topic{c}" for c in range(k)),
    )
    graph = TextAttributedGraph(texts=texts, edges=tuple(e for e, _ in tagged),
                                labels=tuple(int(y) for y in labels), meta=meta)
    oracle = EdgeDecomposition()
    for e, r in tagged:
        oracle.assign(e, [r])
    return graph, oracle


def relation_counts(decomposition: EdgeDecomposition, num_relations: int) -> list[int]:
    counts = [0] * num_relations
    for rels in decomposition.labels.values():
        for r in rels:
            counts[r] += 1
    return counts

