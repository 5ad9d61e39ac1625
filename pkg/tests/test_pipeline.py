from collections import Counter

import numpy as np
import pytest

from conftest import tiny_graph
from pipeline_helpers import encountered_at, check_efficient_contract
from semedge.embed import encode_texts
from semedge.errors import ConfigError, DegenerateFeatureError, PipelineError, ValidationError
from semedge.experiment import PLANTED_RELATIONS, oracle_gateway
from semedge.llm.gateway import BackendConfig, Gateway, ScriptedBackend
from semedge.pipeline import (
    Decomposer,
    agreement,
    annotate_efficient,
    annotate_full,
    baseline_distance,
    baseline_random,
    cosine_distance_matrix,
    decompose_edge,
    discriminate_relations,
    generate_relations,
    identify_relations,
)
from semedge.relations import Relation, RelationSet


def scripted(fixture, **kw):
    return Gateway(BackendConfig(kind="scripted", **kw), ScriptedBackend(fixture))


def test_cora_case_study(cora_fixture, cora_graph):
    gw = scripted(cora_fixture)
    candidates = generate_relations(gw, cora_graph.meta)
    assert len(candidates) == 10
    rs = discriminate_relations(gw, candidates, cora_graph.meta)
    assert rs.names == ["Methodology Similarity", "Contrasting Approaches", "Theoretical Foundation",
                        "Sequential Refinement", "Shared Application Domain"]
    assert "Performance Benchmark" not in rs.names
    assert rs[0].description == candidates[0].description


def test_skip_discriminator_passes_candidates(cora_fixture, cora_graph):
    gw = scripted(cora_fixture)
    rs = identify_relations(gw, cora_graph.meta, skip_discriminator=True)
    assert len(rs) == 10
    assert gw.calls_by_role["discriminator"] == 0


def test_generator_retries_then_fails(cora_graph):
    gw = scripted({"generator": ["no list here", "still none", "1. A: b"]}, max_retries=2)
    assert [r.name for r in generate_relations(gw, cora_graph.meta)] == ["A"]
    gw = scripted({"generator": "no list"}, max_retries=1)
    with pytest.raises(PipelineError):
        generate_relations(gw, cora_graph.meta)


def test_generator_needs_description(cora_graph):
    from semedge.graph import GraphMeta
    with pytest.raises(ValidationError):
        generate_relations(scripted({"generator": "1. A: b"}), GraphMeta())


def test_discriminator_fuzzy_match_and_filter_only():
    cands = [Relation("Co Authorship", "a"), Relation("Topic Overlap", "b")]
    gw = scripted({"discriminator": "1. topic overlaps: something new\n2. Invented Type: c"})
    rs = discriminate_relations(gw, cands)
    assert rs.relations == (cands[1],)


def test_discriminator_removing_everything():
    gw = scripted({"discriminator": "1. Unknown: x"})
    with pytest.raises(PipelineError, match="removed all"):
        discriminate_relations(gw, [Relation("A", "a")])


def test_fallback_uses_corpus_mode():
    rs = RelationSet((Relation("A", "a"), Relation("B", "b"), Relation("C", "c")))
    gw = scripted({"decomposer": "no idea"}, max_retries=0)
    d = Decomposer(gw, rs, prior_counts={2: 4, 1: 4})
    rels, prov, _ = d.decompose("x", "y")
    assert rels == {1} and prov == "fallback"
    assert decompose_edge(scripted({"decomposer": "nope"}, max_retries=0), rs, "x", "y") == ({0}, "fallback")
    with pytest.raises(ValidationError):
        d.decompose("", "y")


def test_full_mode_matches_oracle(small_planted):
    g, truth = small_planted
    dec = annotate_full(oracle_gateway(g, truth), g, PLANTED_RELATIONS)
    assert dec.labels == truth.labels
    assert len(dec.queries) == g.num_edges
    assert set(dec.provenance.values()) == {"queried"}


def test_full_mode_parallel_equals_serial(small_planted):
    g, truth = small_planted
    a = annotate_full(oracle_gateway(g, truth, 0.3, seed=2), g, PLANTED_RELATIONS)
    b = annotate_full(oracle_gateway(g, truth, 0.3, seed=2), g, PLANTED_RELATIONS, parallelism=4)
    assert a.labels == b.labels


@pytest.mark.parametrize("gamma", [1, 2, 3, 10])
def test_efficient_contract(small_planted, gamma):
    g, truth = small_planted
    X = np.asarray(encode_texts(g.texts))
    dec = annotate_efficient(oracle_gateway(g, truth), g, PLANTED_RELATIONS, X, gamma, seed=3)
    check_efficient_contract(g, dec, X, gamma)
    assert len(dec.queries) <= g.num_edges


def test_efficient_contract_noisy_dense():
    from semedge.graph import SynthConfig, synth_planted_graph
    g, truth = synth_planted_graph(SynthConfig(n=90, degree=10, seed=2))
    X = np.asarray(encode_texts(g.texts))
    dec = annotate_efficient(oracle_gateway(g, truth, 0.4, seed=1), g, PLANTED_RELATIONS, X, 3, seed=0)
    check_efficient_contract(g, dec, X, 3)
    assert len(dec.queries) <= 0.5 * g.num_edges


def test_efficient_beats_node_majority_baseline(small_planted):
    g, truth = small_planted
    X = np.asarray(encode_texts(g.texts))
    dec = annotate_efficient(oracle_gateway(g, truth), g, PLANTED_RELATIONS, X, 2, seed=0)
    # same queries, but each pseudo edge takes the anchor's most common queried label set
    majority = {}
    for (a, b), (i, _) in dec.pseudo_source.items():
        sets = Counter(dec[(i, w)] for w in encountered_at(dec, g, i))
        majority[(a, b)] = max(sorted(sets, key=sorted), key=lambda s: sets[s])
    base_hits = sum(1 for e in g.edges if majority.get(e, dec[e]) == truth[e])
    assert agreement(dec, truth) >= base_hits / g.num_edges


def test_efficient_gamma_validation(small_planted):
    g, truth = small_planted
    X = np.asarray(encode_texts(g.texts))
    with pytest.raises(ConfigError):
        annotate_efficient(oracle_gateway(g, truth), g, PLANTED_RELATIONS, X, 0)
    with pytest.raises(ConfigError):
        annotate_efficient(oracle_gateway(g, truth), g, PLANTED_RELATIONS, X[:5], 2)


def test_efficient_unbounded_gamma_stops_after_all_types(small_planted):
    g, truth = small_planted
    X = np.asarray(encode_texts(g.texts))
    dec = annotate_efficient(oracle_gateway(g, truth), g, PLANTED_RELATIONS, X, None, seed=0)
    check_efficient_contract(g, dec, X, float("inf"))


def test_cosine_distance_zero_rows():
    X = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    D = cosine_distance_matrix(X, [0, 1], [2])
    assert D[0, 0] == pytest.approx(1 - 1 / np.sqrt(2))
    assert D[1, 0] == 1.0


def test_random_baseline():
    g = tiny_graph([(0, 1), (1, 2), (2, 3)], n=4)
    one = baseline_random(g, 1, seed=0)
    assert all(r == {0} for r in one.labels.values())
    assert baseline_random(g, 3, 9).labels == baseline_random(g, 3, 9).labels
    with pytest.raises(ConfigError):
        baseline_random(g, 0, 0)


def test_distance_baseline_hand_case():
    g = tiny_graph([(0, 1), (0, 2)], n=3)
    X = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]])
    dec = baseline_distance(g, X, 0.5)
    assert dec[(0, 1)] == {0} and dec[(0, 2)] == {1}
    with pytest.raises(DegenerateFeatureError):
        baseline_distance(g, np.array([[1.0, 0], [0, 0], [0, 1.0]]), 0.5)
    with pytest.raises(ConfigError):
        baseline_distance(g, X, 2.0)
