"""Relation identification, edge decomposition and rule-based baselines."""
from __future__ import annotations

import difflib
import logging
import math
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, DegenerateFeatureError, ParseError, PipelineError, ValidationError
from .graph import GraphMeta, TextAttributedGraph
from .llm.gateway import Gateway
from .llm.parsing import parse_decomposition, parse_relation_list
from .llm.templates import DEFAULT_REQUIREMENTS, decomposer_bindings, load_template, render_prompt
from .relations import EdgeDecomposition, QueryRecord, Relation, RelationSet, canonical_edge

logger = logging.getLogger(__name__)


def _description(meta: GraphMeta) -> str:
    return meta.composition().rstrip(".")


def render_candidates(candidates) -> str:
    return "\n".join(f"{k}. {rel.as_line()}" for k, rel in enumerate(candidates, 1))


def _ask_list(gateway: Gateway, role: str, prompt: str) -> list[tuple[str, str]]:
    retries = gateway.config.max_retries
    for attempt in range(retries + 1):
        text = gateway.complete(role, prompt, attempt=attempt)
        try:
            return parse_relation_list(text)
        except ParseError:
            logger.warning("%s answer had no relation list (attempt %d/%d)", role, attempt + 1, retries + 1)
    raise PipelineError(f"{role} produced no parsable relation list after {retries + 1} attempts")


def generate_relations(gateway: Gateway, meta: GraphMeta) -> list[Relation]:
    if not meta.composition().strip():
        raise ValidationError("graph meta has no description")
    prompt = render_prompt(load_template("generator"), {"graph_description": _description(meta)})
    out, seen = [], set()
    for name, desc in _ask_list(gateway, "generator", prompt):
        if name.lower() in seen:
            continue
        seen.add(name.lower())
        out.append(Relation(name, desc or name))
    return out


def _match_candidate(name: str, candidates: list[Relation]) -> int | None:
    lowered = [c.name.lower() for c in candidates]
    key = name.strip().lower()
    if key in lowered:
        return lowered.index(key)
    close = difflib.get_close_matches(key, lowered, n=1, cutoff=0.8)
    return lowered.index(close[0]) if close else None


def discriminate_relations(gateway: Gateway, candidates, meta: GraphMeta | None = None,
                           requirements: str = DEFAULT_REQUIREMENTS) -> RelationSet:
    """Filter candidates down to the ones the discriminator keeps.

    The discriminator may only filter: retained names are matched back to
    candidates (exact, then fuzzy case-insensitive) and the candidate's own
    description is kept. Candidate order is preserved.
    """
    candidates = list(candidates)
    if not candidates:
        raise PipelineError("no candidate relations to discriminate")
    prompt = render_prompt(load_template("discriminator"), {
        "graph_description": _description(meta or GraphMeta()),
        "requirements": requirements,
        "candidate_relations": render_candidates(candidates),
    })
    keep = set()
    for name, _ in _ask_list(gateway, "discriminator", prompt):
        idx = _match_candidate(name, candidates)
        if idx is None:
            logger.warning("discriminator returned unknown relation %r; dropped", name)
        else:
            keep.add(idx)
    if not keep:
        raise PipelineError("discriminator removed all relations")
    return RelationSet(tuple(candidates[k] for k in sorted(keep)))


def identify_relations(gateway: Gateway, meta: GraphMeta, skip_discriminator: bool = False) -> RelationSet:
    candidates = generate_relations(gateway, meta)
    if skip_discriminator:
        return RelationSet(tuple(candidates))
    return discriminate_relations(gateway, candidates, meta)


class Decomposer:
    """Stateful wrapper around decomposer queries.

    Tracks corpus-wide relation frequencies so unparsable answers fall back
    to the most frequent relation seen so far (lowest index on ties, 0 if
    nothing has been seen).
    """

    def __init__(self, gateway: Gateway, relation_set: RelationSet, prior_counts=None):
        self.gateway = gateway
        self.relation_set = relation_set
        self.counts = Counter(prior_counts or {})
        self.fallbacks = 0
        self._listing = relation_set.enumerated()
        self._template = load_template("decomposer")
        self._lock = threading.Lock()

    def prompt(self, text_i: str, text_j: str) -> str:
        return render_prompt(self._template, decomposer_bindings(self._listing, text_i, text_j))

    def most_frequent(self) -> int:
        with self._lock:
            if not self.counts:
                return 0
            best = max(self.counts.values())
            return min(r for r, c in self.counts.items() if c == best)

    def decompose(self, text_i: str, text_j: str) -> tuple[frozenset[int], str, bool]:
        """Return ``(relations, provenance, cached)`` for one edge."""
        if not text_i.strip() or not text_j.strip():
            raise ValidationError("decomposer needs nonempty node texts")
        prompt = self.prompt(text_i, text_j)
        R = len(self.relation_set)
        retries = self.gateway.config.max_retries
        cached_all = True
        for attempt in range(retries + 1):
            comp = self.gateway.complete_ex("decomposer", prompt, attempt=attempt)
            cached_all = cached_all and comp.cached
            try:
                rels = frozenset(parse_decomposition(comp.text, R, self.relation_set.names))
            except ParseError:
                continue
            with self._lock:
                self.counts.update(rels)
            return rels, "queried", cached_all
        fallback = self.most_frequent()
        with self._lock:
            self.fallbacks += 1
        logger.warning("decomposer answer unparsable after %d attempts; falling back to relation %d",
                       retries + 1, fallback)
        return frozenset([fallback]), "fallback", cached_all


def decompose_edge(gateway: Gateway, relation_set: RelationSet, text_i: str, text_j: str,
                   prior_counts=None) -> tuple[frozenset[int], str]:
    rels, prov, _ = Decomposer(gateway, relation_set, prior_counts).decompose(text_i, text_j)
    return rels, prov


def annotate_full(gateway: Gateway, graph: TextAttributedGraph, relation_set: RelationSet,
                  parallelism: int = 1) -> EdgeDecomposition:
    """Query the decomposer once per undirected edge."""
    dec = Decomposer(gateway, relation_set)
    out = EdgeDecomposition()

    def run(edge):
        i, j = edge
        return edge, dec.decompose(graph.texts[i], graph.texts[j])

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run, graph.edges))
    else:
        results = [run(e) for e in graph.edges]
    for (i, j), (rels, prov, cached) in results:
        out.assign((i, j), rels, prov)
        out.queries.append(QueryRecord(i, (i, j), cached))
    return out


def cosine_distance_matrix(X: np.ndarray, rows, cols) -> np.ndarray:
    """Cosine distance between ``X[rows]`` and ``X[cols]``; zero rows count as distance 1."""
    A, B = X[list(rows)], X[list(cols)]
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    sim = A @ B.T
    denom = np.outer(na, nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, sim / np.where(denom > 0, denom, 1.0), 0.0)
    return 1.0 - sim


def annotate_efficient(gateway: Gateway, graph: TextAttributedGraph, relation_set: RelationSet,
                       features, gamma, seed: int = 0) -> EdgeDecomposition:
    """Patience-bounded per-node querying with nearest-neighbour pseudo-labels.

    Nodes are visited in index order. Edges already queried from the other
    endpoint seed the node's encountered set for free. The remaining
    neighbours are visited in a per-node seeded random order and queried
    until every relation type has been observed at this node or ``gamma``
    queries were spent. Each unlabelled neighbour then copies the labels of
    the encountered neighbour closest to it in cosine distance (ties go to
    the lower node index). An edge pseudo-labelled from one endpoint keeps
    that label unless the other endpoint queries it.
    """
    if gamma is None:
        gamma = math.inf
    if gamma < 1:
        raise ConfigError("gamma must be >= 1")
    X = np.asarray(features, dtype=np.float64)
    if X.shape[0] != graph.node_count:
        raise ConfigError(f"features have {X.shape[0]} rows, graph has {graph.node_count} nodes")
    R = len(relation_set)
    dec = Decomposer(gateway, relation_set)
    out = EdgeDecomposition()
    adj = graph.neighbors()

    def is_queried(e):
        return out.provenance_of(e) in ("queried", "fallback")

    for i in range(graph.node_count):
        nbrs = adj[i]
        if not nbrs:
            continue
        encountered: list[int] = []
        seen_rels: set[int] = set()
        for j in nbrs:
            if is_queried((i, j)):
                encountered.append(j)
                seen_rels |= out[(i, j)]

        rng = np.random.default_rng([seed, i])
        pending = [nbrs[k] for k in rng.permutation(len(nbrs)) if not is_queried((i, nbrs[k]))]
        spent = 0
        for j in pending:
            if len(seen_rels) >= R or spent >= gamma:
                break
            rels, prov, cached = dec.decompose(graph.texts[i], graph.texts[j])
            out.assign((i, j), rels, prov)
            out.queries.append(QueryRecord(i, canonical_edge(i, j), cached))
            encountered.append(j)
            seen_rels |= rels
            spent += 1

        if not encountered:
            # Unreachable for gamma >= 1, kept so coverage stays total.
            j = pending[0]
            rels, prov, cached = dec.decompose(graph.texts[i], graph.texts[j])
            out.assign((i, j), rels, prov)
            out.queries.append(QueryRecord(i, canonical_edge(i, j), cached))
            encountered.append(j)

        rest = [u for u in nbrs if (i, u) not in out]
        if not rest:
            continue
        anchors = sorted(encountered)
        dist = cosine_distance_matrix(X, rest, anchors)
        for row, u in enumerate(rest):
            v = anchors[int(np.argmin(dist[row]))]
            out.assign((i, u), out[(i, v)], "pseudo")
            out.pseudo_source[canonical_edge(i, u)] = (i, v)
    return out


def baseline_random(graph: TextAttributedGraph, num_relations: int, seed: int) -> EdgeDecomposition:
    if num_relations < 1:
        raise ConfigError("num_relations must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, num_relations, size=graph.num_edges)
    out = EdgeDecomposition()
    for e, r in zip(graph.edges, draws):
        out.assign(e, [int(r)], "baseline")
    return out


def edge_cosine_distances(graph: TextAttributedGraph, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateFeatureError(f"feature row {int(zero[0])} has zero norm")
    if not graph.edges:
        return np.zeros(0)
    e = np.asarray(graph.edges)
    Xn = X / norms[:, None]
    return 1.0 - np.einsum("ij,ij->i", Xn[e[:, 0]], Xn[e[:, 1]])


def baseline_distance(graph: TextAttributedGraph, features, threshold: float) -> EdgeDecomposition:
    """Two relations: 0 for cosine distance <= threshold, 1 otherwise."""
    if not 0.0 < threshold < 2.0:
        raise ConfigError("threshold must lie in (0, 2)")
    dist = edge_cosine_distances(graph, features)
    out = EdgeDecomposition()
    for e, d in zip(graph.edges, dist):
        out.assign(e, [0 if d <= threshold else 1], "baseline")
    return out


def agreement(decomposition: EdgeDecomposition, truth: EdgeDecomposition) -> float:
    """Fraction of truth edges whose relation sets match exactly."""
    if not len(truth):
        return 1.0
    hits = sum(1 for e, rels in truth.labels.items() if decomposition.get(e) == rels)
    return hits / len(truth)
