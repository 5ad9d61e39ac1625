"""Glue for end-to-end runs: features, model inputs, grid runs per seed."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .embed import encode_relation_features, encode_texts
from .errors import ConfigError
from .gnn.analysis import inter_prototype_similarity
from .gnn.inputs import GraphInputs, gcn_inputs, gine_inputs, rgcn_inputs
from .gnn.models import ModelSpec
from .gnn.training import GridResult, TrainConfig, default_grid, grid_search
from .graph import (
    TextAttributedGraph,
    build_substructures,
    duplicate_for_edge_features,
    make_split,
)
from .llm.gateway import BackendConfig, Gateway, OracleBackend
from .relations import EdgeDecomposition, Relation, RelationSet

logger = logging.getLogger(__name__)

PLANTED_RELATIONS = RelationSet((
    Relation("Shared Topic", "Both documents are about the same topic."),
    Relation("Adjacent Topic", "One document's topic directly follows the other's in the topic cycle."),
))


def oracle_gateway(graph: TextAttributedGraph, truth: EdgeDecomposition, p_noise: float = 0.0,
                   seed: int = 0, num_relations: int | None = None) -> Gateway:
    config = BackendConfig(kind="oracle", p_noise=p_noise, seed=seed, num_relations=num_relations)
    backend = OracleBackend(graph, truth, p_noise=p_noise, seed=seed, num_relations=num_relations)
    return Gateway(config, backend)


def build_inputs(arch: str, graph: TextAttributedGraph, X, decomposition: EdgeDecomposition | None = None,
                 relation_set: RelationSet | None = None) -> GraphInputs:
    if arch == "gcn":
        return gcn_inputs(X, graph)
    if decomposition is None:
        raise ConfigError(f"{arch} needs an edge decomposition")
    R = len(relation_set) if relation_set is not None else max(decomposition.num_relations(), 1)
    if arch == "rgcn":
        return rgcn_inputs(X, build_substructures(graph, decomposition, R))
    if relation_set is None:
        raise ConfigError("gine needs the relation set for edge features")
    E = np.asarray(encode_relation_features(relation_set))
    return gine_inputs(X, duplicate_for_edge_features(graph, decomposition, R), E)


@dataclass
class SeedRun:
    seed: int
    result: GridResult
    seconds: float
    sim_raw: float
    sim_learned: float
    hyper: dict = field(default_factory=dict)

    @property
    def test_acc(self) -> float:
        return self.result.best_record.acc["test"]

    @property
    def val_acc(self) -> float:
        return self.result.best_record.acc["val"]


def run_seed(arch: str, graph: TextAttributedGraph, X, seed: int, decomposition=None,
             relation_set=None, grid: bool = True, epochs: int = 200, single: dict | None = None) -> SeedRun:
    """Split with ``seed``, train the grid (or one config) with ``seed``, and summarize."""
    start = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    inputs = build_inputs(arch, graph, X, decomposition, relation_set)
    split = make_split(graph, seed)
    labels = graph.label_array()
    R = len(relation_set) if relation_set is not None else (
        max(decomposition.num_relations(), 1) if decomposition is not None else 1)
    base = ModelSpec(arch, num_classes=graph.num_classes, num_relations=R, seed=seed)
    if grid:
        configs = default_grid(base, epochs)
    else:
        single = dict(single or {})
        lr = single.pop("lr", 0.01)
        configs = [(replace(base, **single), TrainConfig(lr=lr, epochs=epochs))]
    result = grid_search(configs, inputs, labels, split)
    seconds = time.perf_counter() - start
    learned = result.best.hidden(inputs)
    return SeedRun(seed, result, seconds,
                   sim_raw=inter_prototype_similarity(X, labels),
                   sim_learned=inter_prototype_similarity(learned, labels),
                   hyper=result.best_record.hyper)


def default_features(graph: TextAttributedGraph) -> np.ndarray:
    return np.asarray(encode_texts(graph.texts), dtype=np.float64)


def mean_sem(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    sem = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), sem
