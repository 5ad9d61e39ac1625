import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semedge.graph import GraphMeta, SynthConfig, TextAttributedGraph, synth_planted_graph

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"


@pytest.fixture(scope="session")
def planted():
    """Default planted graph (N=300, K=3, deg=5 per relation) and its truth."""
    return synth_planted_graph(SynthConfig(seed=1))


@pytest.fixture(scope="session")
def small_planted():
    return synth_planted_graph(SynthConfig(n=60, degree=3, seed=7))


@pytest.fixture
def cora_fixture_path():
    return FIXTURES / "cora_scripted.json"


@pytest.fixture
def cora_fixture(cora_fixture_path):
    return json.loads(cora_fixture_path.read_text())


@pytest.fixture
def cora_graph():
    meta = GraphMeta(
        description="A citation graph of machine learning publications.",
        node_kind="scientific papers, with their abstracts as text",
        edge_rule="that one paper cites the other",
        class_names=("Case Based", "Genetic Algorithms", "Neural Networks", "Probabilistic Methods",
                     "Reinforcement Learning", "Rule Learning", "Theory"),
    )
    texts = ("A convolutional model for image recognition.", "Evolving rule sets with genetic search.",
             "Policy gradients for robot control.")
    return TextAttributedGraph(texts=texts, edges=((0, 1), (1, 2)), labels=(2, 1, 4), meta=meta)


def tiny_graph(edges, n=None, labels=None, texts=None):
    n = n if n is not None else 1 + max(max(e) for e in edges)
    texts = texts or tuple(f"node {i} text" for i in range(n))
    return TextAttributedGraph(texts=texts, edges=tuple(edges), labels=labels)


def rng(seed=0):
    return np.random.default_rng(seed)
