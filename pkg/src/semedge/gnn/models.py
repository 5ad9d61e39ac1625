"""Forward and reverse passes for the three dense GNN families.

Parameters live in a flat ``dict[str, ndarray]`` so optimizers, gradient
checks and serialization treat every architecture the same way. Hidden
layers use ReLU; the last layer is linear. Dropout (inverted) is applied to
the input of every layer in training mode only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError, ShapeError
from .inputs import GraphInputs

ARCHITECTURES = ("gcn", "rgcn", "gine")
Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    num_classes: int
    layers: int = 2
    hidden: int = 64
    dropout: float = 0.0
    num_relations: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if self.layers < 1 or self.hidden < 1 or self.num_classes < 1:
            raise ConfigError("layers, hidden and num_classes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.arch != "gcn" and self.num_relations < 1:
            raise ConfigError("relational models need num_relations >= 1")

    def dims(self, in_dim: int) -> list[int]:
        return [in_dim] + [self.hidden] * (self.layers - 1) + [self.num_classes]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _dropout(H, p, train, rng):
    if not train or p <= 0.0:
        return H, None
    if sp.issparse(H):
        # only stored entries can be non-zero, so only they need a draw
        out = H.copy()
        out.data = out.data * ((rng.random(out.data.shape) >= p) / (1.0 - p))
        return out, None
    mask = (rng.random(H.shape) >= p) / (1.0 - p)
    return H * mask, mask


def _relu(x):
    return np.maximum(x, 0.0)


@dataclass
class ForwardCache:
    layers: list = field(default_factory=list)
    hidden: np.ndarray | None = None  # input to the last layer


class GCN:
    """h' = A_hat h W + b with the symmetric-normalized self-looped adjacency."""

    arch = "gcn"

    def __init__(self, spec: ModelSpec, in_dim: int, edge_dim: int | None = None):
        self.spec, self.in_dim = spec, in_dim
        self.dims = spec.dims(in_dim)

    def init_params(self, rng) -> Params:
        p = {}
        for l, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            p[f"W.{l}"] = glorot(rng, a, b)
            p[f"b.{l}"] = np.zeros(b)
        return p

    def forward(self, params: Params, inputs: GraphInputs, train=False, rng=None):
        if inputs.gcn_adj is None:
            raise ShapeError("gcn needs a normalized adjacency")
        A, _ = inputs.gcn_ops()
        _check_features(inputs.X, self.in_dim)
        H = inputs.first_layer_input()
        cache = ForwardCache()
        last = len(self.dims) - 2
        for l in range(last + 1):
            if l == last:
                cache.hidden = _dense(H)
            Hd, mask = _dropout(H, self.spec.dropout, train, rng)
            # A (H W) == (A H) W; transforming first keeps the sparse product narrow
            Zl = A @ (Hd @ params[f"W.{l}"]) + params[f"b.{l}"]
            cache.layers.append((Hd, mask, Zl))
            H = _relu(Zl) if l < last else Zl
        return H, cache

    def backward(self, params: Params, cache: ForwardCache, dZ, inputs: GraphInputs) -> Params:
        _, At = inputs.gcn_ops()
        grads = {}
        dH = dZ
        for l in range(len(cache.layers) - 1, -1, -1):
            Hd, mask, Zl = cache.layers[l]
            dZl = dH if l == len(cache.layers) - 1 else dH * (Zl > 0)
            dY = At @ dZl
            grads[f"W.{l}"] = np.asarray(Hd.T @ dY)
            grads[f"b.{l}"] = dZl.sum(axis=0)
            if l == 0:
                break
            dHd = dY @ params[f"W.{l}"].T
            dH = dHd if mask is None else dHd * mask
        return grads


class RGCN:
    """h' = h W_self + sum_r mean_{j in N_r(i)} h_j W_r + b."""

    arch = "rgcn"

    def __init__(self, spec: ModelSpec, in_dim: int, edge_dim: int | None = None):
        self.spec, self.in_dim = spec, in_dim
        self.dims = spec.dims(in_dim)

    def init_params(self, rng) -> Params:
        p = {}
        for l, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            p[f"W_self.{l}"] = glorot(rng, a, b)
            for r in range(self.spec.num_relations):
                p[f"W_rel.{l}.{r}"] = glorot(rng, a, b)
            p[f"b.{l}"] = np.zeros(b)
        return p

    def _stacked(self, params, l):
        R = self.spec.num_relations
        return np.hstack([params[f"W_self.{l}"]] + [params[f"W_rel.{l}.{r}"] for r in range(R)])

    def forward(self, params: Params, inputs: GraphInputs, train=False, rng=None):
        R = self.spec.num_relations
        if len(inputs.rel_adj) != R:
            raise ShapeError(f"expected {R} relation operators, got {len(inputs.rel_adj)}")
        _check_features(inputs.X, self.in_dim)
        A_cat, _ = inputs.relation_ops()
        H = inputs.first_layer_input()
        cache = ForwardCache()
        last = len(self.dims) - 2
        for l in range(last + 1):
            if l == last:
                cache.hidden = _dense(H)
            Hd, mask = _dropout(H, self.spec.dropout, train, rng)
            out = self.dims[l + 1]
            # one product against [W_self | W_1 | ... | W_R], then per-relation means
            Y = np.asarray(Hd @ self._stacked(params, l))
            Zl = Y[:, :out] + params[f"b.{l}"] + A_cat @ _blocks_to_rows(Y[:, out:], R)
            cache.layers.append((Hd, mask, Zl))
            H = _relu(Zl) if l < last else Zl
        return H, cache

    def backward(self, params: Params, cache: ForwardCache, dZ, inputs: GraphInputs) -> Params:
        _, A_catT = inputs.relation_ops()
        R = self.spec.num_relations
        grads = {}
        dH = dZ
        for l in range(len(cache.layers) - 1, -1, -1):
            Hd, mask, Zl = cache.layers[l]
            dZl = dH if l == len(cache.layers) - 1 else dH * (Zl > 0)
            dY = np.hstack([dZl, _rows_to_blocks(A_catT @ dZl, R)])
            dW = np.asarray(Hd.T @ dY)
            out = dZl.shape[1]
            grads[f"W_self.{l}"] = dW[:, :out]
            for r in range(R):
                grads[f"W_rel.{l}.{r}"] = dW[:, (r + 1) * out:(r + 2) * out]
            grads[f"b.{l}"] = dZl.sum(axis=0)
            if l == 0:
                break
            dHd = dY @ self._stacked(params, l).T
            dH = dHd if mask is None else dHd * mask
        return grads


class GINE:
    """Edge-featured update h' = MLP((1 + eps) h_i + sum_(j,r) ReLU(h_j + xi(e_r))).

    ``xi`` is a per-layer linear map from relation features to the layer's
    input width. Each MLP has two linear maps with a ReLU between them.
    """

    arch = "gine"

    def __init__(self, spec: ModelSpec, in_dim: int, edge_dim: int | None = None):
        if edge_dim is None:
            raise ConfigError("gine needs the relation feature width")
        self.spec, self.in_dim, self.edge_dim = spec, in_dim, edge_dim
        self.dims = spec.dims(in_dim)

    def init_params(self, rng) -> Params:
        p = {}
        hid = self.spec.hidden
        for l, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            p[f"eps.{l}"] = np.zeros(1)
            p[f"W_edge.{l}"] = glorot(rng, self.edge_dim, a)
            p[f"b_edge.{l}"] = np.zeros(a)
            p[f"W1.{l}"] = glorot(rng, a, hid)
            p[f"b1.{l}"] = np.zeros(hid)
            p[f"W2.{l}"] = glorot(rng, hid, b)
            p[f"b2.{l}"] = np.zeros(b)
        return p

    def forward(self, params: Params, inputs: GraphInputs, train=False, rng=None):
        if inputs.edge_src is None or inputs.edge_features is None:
            raise ShapeError("gine needs duplicated edges and relation features")
        if inputs.edge_features.shape[1] != self.edge_dim:
            raise ShapeError(f"relation features have width {inputs.edge_features.shape[1]}, "
                             f"expected {self.edge_dim}")
        H = _check_features(inputs.X, self.in_dim)
        E = inputs.edge_features
        S_dst, _, _ = inputs.scatter_ops()
        src, rel = inputs.edge_src, inputs.edge_rel
        cache = ForwardCache()
        last = len(self.dims) - 2
        for l in range(last + 1):
            if l == last:
                cache.hidden = H
            Hd, mask = _dropout(H, self.spec.dropout, train, rng)
            Xi = E @ params[f"W_edge.{l}"] + params[f"b_edge.{l}"]
            pre = Hd[src] + Xi[rel]
            m = S_dst @ _relu(pre)
            agg = (1.0 + params[f"eps.{l}"][0]) * Hd + m
            U = agg @ params[f"W1.{l}"] + params[f"b1.{l}"]
            V = _relu(U)
            O = V @ params[f"W2.{l}"] + params[f"b2.{l}"]
            cache.layers.append((Hd, mask, pre, agg, U, V, O))
            H = _relu(O) if l < last else O
        return H, cache

    def backward(self, params: Params, cache: ForwardCache, dZ, inputs: GraphInputs) -> Params:
        E = inputs.edge_features
        S_dst, S_src, S_rel = inputs.scatter_ops()
        grads = {}
        dH = dZ
        n_layers = len(cache.layers)
        for l in range(n_layers - 1, -1, -1):
            Hd, mask, pre, agg, U, V, O = cache.layers[l]
            dO = dH if l == n_layers - 1 else dH * (O > 0)
            grads[f"W2.{l}"] = V.T @ dO
            grads[f"b2.{l}"] = dO.sum(axis=0)
            dU = (dO @ params[f"W2.{l}"].T) * (U > 0)
            grads[f"W1.{l}"] = agg.T @ dU
            grads[f"b1.{l}"] = dU.sum(axis=0)
            dagg = dU @ params[f"W1.{l}"].T
            grads[f"eps.{l}"] = np.array([np.sum(dagg * Hd)])
            dpre = (S_dst.T @ dagg) * (pre > 0)
            dXi = S_rel @ dpre
            grads[f"W_edge.{l}"] = E.T @ dXi
            grads[f"b_edge.{l}"] = dXi.sum(axis=0)
            if l == 0:
                break
            dHd = (1.0 + params[f"eps.{l}"][0]) * dagg + S_src @ dpre
            dH = dHd if mask is None else dHd * mask
        return grads


def _blocks_to_rows(Y, R):
    """(N, R*d) column blocks -> (R*N, d) with block r in rows r*N..(r+1)*N."""
    n, rd = Y.shape
    return Y.reshape(n, R, rd // R).transpose(1, 0, 2).reshape(R * n, rd // R)


def _rows_to_blocks(Y, R):
    rn, d = Y.shape
    return Y.reshape(R, rn // R, d).transpose(1, 0, 2).reshape(rn // R, R * d)


def _dense(H):
    return H.toarray() if sp.issparse(H) else H


def _check_features(X, in_dim):
    if X.ndim != 2 or X.shape[1] != in_dim:
        raise ShapeError(f"features of shape {X.shape} do not match input width {in_dim}")
    return X


def build_model(spec: ModelSpec, in_dim: int, edge_dim: int | None = None):
    cls = {"gcn": GCN, "rgcn": RGCN, "gine": GINE}[spec.arch]
    return cls(spec, in_dim, edge_dim)


def check_params(model, params: Params) -> None:
    ref = model.init_params(np.random.default_rng(0))
    if set(ref) != set(params):
        raise ShapeError(f"parameter names differ: {sorted(set(ref) ^ set(params))}")
    for k, v in ref.items():
        if params[k].shape != v.shape:
            raise ShapeError(f"{k}: shape {params[k].shape}, expected {v.shape}")
        if not np.all(np.isfinite(params[k])):
            raise ShapeError(f"{k}: non-finite entries")


def forward_gcn(params: Params, X, adj, spec: ModelSpec | None = None):
    """Eval-mode GCN logits from explicit params and a normalized adjacency."""
    spec = spec or _infer_spec("gcn", params)
    model = GCN(spec, params["W.0"].shape[0])
    Z, cache = model.forward(params, GraphInputs(np.asarray(X, dtype=np.float64), gcn_adj=adj))
    return Z, cache.hidden


def forward_rgcn(params: Params, X, substructures, spec: ModelSpec | None = None):
    from .inputs import rgcn_inputs
    spec = spec or _infer_spec("rgcn", params)
    if substructures.num_relations != spec.num_relations:
        raise IndexError(f"substructures carry {substructures.num_relations} relations, "
                         f"model expects {spec.num_relations}")
    inputs = rgcn_inputs(X, substructures)
    Z, _ = RGCN(spec, params["W_self.0"].shape[0]).forward(params, inputs)
    return Z


def forward_gine(params: Params, X, duplicated_edges, relation_features, spec: ModelSpec | None = None):
    from .inputs import gine_inputs
    spec = spec or _infer_spec("gine", params)
    inputs = gine_inputs(X, duplicated_edges, relation_features)
    model = GINE(spec, params["W1.0"].shape[0], params["W_edge.0"].shape[0])
    Z, _ = model.forward(params, inputs)
    return Z


def _infer_spec(arch: str, params: Params) -> ModelSpec:
    layer_ids = {int(k.split(".")[1]) for k in params}
    L = max(layer_ids) + 1
    if arch == "gcn":
        out = params[f"W.{L - 1}"].shape[1]
        hidden = params["W.0"].shape[1] if L > 1 else out
        return ModelSpec("gcn", num_classes=out, layers=L, hidden=hidden)
    if arch == "rgcn":
        R = sum(1 for k in params if k.startswith("W_rel.0."))
        out = params[f"W_self.{L - 1}"].shape[1]
        hidden = params["W_self.0"].shape[1] if L > 1 else out
        return ModelSpec("rgcn", num_classes=out, layers=L, hidden=hidden, num_relations=R)
    out = params[f"W2.{L - 1}"].shape[1]
    hidden = params["W1.0"].shape[1]
    return ModelSpec("gine", num_classes=out, layers=L, hidden=hidden, num_relations=1)
