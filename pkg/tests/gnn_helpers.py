"""Shared builders for the GNN tests."""
import numpy as np

from semedge.embed import encode_texts
from semedge.gnn.inputs import gcn_inputs, gine_inputs, rgcn_inputs
from semedge.gnn.models import ModelSpec, build_model
from semedge.gnn.training import loss_and_grad
from semedge.graph import SynthConfig, TextAttributedGraph, build_substructures, duplicate_for_edge_features, synth_planted_graph
from semedge.relations import EdgeDecomposition


def twelve_node_instance(dim=16, seed=3):
    g, truth = synth_planted_graph(SynthConfig(n=60, degree=2, seed=seed))
    edges = [e for e in g.edges if e[0] < 12 and e[1] < 12]
    sub = TextAttributedGraph(texts=g.texts[:12], edges=tuple(edges), labels=g.labels[:12])
    dec = EdgeDecomposition()
    for e in edges:
        # a few multi-labelled edges so both relation paths see shared edges
        dec.assign(e, truth[e] | ({0, 1} if e[0] % 3 == 0 else set()))
    X = np.asarray(encode_texts(sub.texts, dim=dim))
    E = np.random.default_rng(seed).normal(size=(2, 6))
    return sub, dec, X, E


def all_inputs(graph, dec, X, E, R=2):
    return {
        "gcn": gcn_inputs(X, graph),
        "rgcn": rgcn_inputs(X, build_substructures(graph, dec, R)),
        "gine": gine_inputs(X, duplicate_for_edge_features(graph, dec, R), E),
    }


def model_for(arch, X, E, layers=3, hidden=5, dropout=0.0, K=3, R=2):
    spec = ModelSpec(arch, K, layers=layers, hidden=hidden, dropout=dropout, num_relations=R)
    return build_model(spec, X.shape[1], E.shape[1])


def jitter(params, seed=2, scale=0.1):
    rng = np.random.default_rng(seed)
    for k, v in params.items():
        if k.startswith(("b", "eps")):
            v += rng.normal(0, scale, v.shape)
    return params


def preactivation_margin(model, params, inputs):
    """Smallest |pre-activation| over every ReLU in an eval forward."""
    _, cache = model.forward(params, inputs)
    vals = []
    for layer in cache.layers:
        if model.arch == "gine":
            _, _, pre, _, U, _, O = layer
            vals += [pre, U, O]
        else:
            vals.append(layer[-1])
    return min(float(np.min(np.abs(v))) for v in vals if v.size)


def kink_free_params(model, inputs, margin=1e-3, start=1):
    """Parameters whose ReLU inputs all sit at least ``margin`` away from zero.

    Central differences straddling a ReLU kink are not a gradient oracle, so
    the instance is chosen to keep every pre-activation clear of it.
    """
    for seed in range(start, start + 200):
        params = jitter(model.init_params(np.random.default_rng(seed)), seed=seed + 1000)
        if preactivation_margin(model, params, inputs) > margin:
            return params
    raise RuntimeError("no kink-free parameters found")


def max_fd_error(model, params, inputs, labels, idx, step=1e-4, dropout_seed=None):
    def f():
        rng = None if dropout_seed is None else np.random.default_rng(dropout_seed)
        return loss_and_grad(model, params, inputs, labels, idx, train=dropout_seed is not None, rng=rng)

    _, grads = f()
    worst = {}
    for name, v in params.items():
        num = np.zeros_like(v)
        for ix in np.ndindex(v.shape):
            orig = v[ix]
            v[ix] = orig + step
            hi = f()[0]
            v[ix] = orig - step
            lo = f()[0]
            v[ix] = orig
            num[ix] = (hi - lo) / (2 * step)
        denom = max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-8)
        worst[name] = float(np.linalg.norm(num - grads[name]) / denom)
    return worst
