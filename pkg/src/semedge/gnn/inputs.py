"""Precomputed structure operators consumed by the forward passes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ShapeError
from ..graph import RelationSubstructures


@dataclass
class GraphInputs:
    """Node features plus whichever structure the chosen architecture needs."""

    X: np.ndarray
    gcn_adj: sp.csr_matrix | None = None
    rel_adj: list[sp.csr_matrix] = field(default_factory=list)
    edge_src: np.ndarray | None = None
    edge_dst: np.ndarray | None = None
    edge_rel: np.ndarray | None = None
    edge_features: np.ndarray | None = None
    # derived scatter operators for the edge-featured model
    _gather: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.X.shape[0]

    def permuted(self, perm: np.ndarray) -> "GraphInputs":
        """Same graph with node ``perm[k]`` renamed to ``k``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        P = sp.csr_matrix((np.ones(len(perm)), (np.arange(len(perm)), perm)), shape=(len(perm),) * 2)
        out = GraphInputs(self.X[perm], edge_features=self.edge_features)
        if self.gcn_adj is not None:
            out.gcn_adj = (P @ self.gcn_adj @ P.T).tocsr()
        out.rel_adj = [(P @ A @ P.T).tocsr() for A in self.rel_adj]
        if self.edge_src is not None:
            out.edge_src, out.edge_dst, out.edge_rel = inv[self.edge_src], inv[self.edge_dst], self.edge_rel
        return out

    def first_layer_input(self):
        """``X`` as CSR when it is mostly zeros (hashed bag-of-words), else dense."""
        if "X0" not in self._gather:
            X = self.X
            dense = X.size == 0 or np.count_nonzero(X) > 0.3 * X.size
            self._gather["X0"] = X if dense else sp.csr_matrix(X)
        return self._gather["X0"]

    def gcn_ops(self):
        """``(A_hat, A_hat^T)`` in CSR so both passes run row-major products."""
        if "gcn" not in self._gather:
            self._gather["gcn"] = (self.gcn_adj.tocsr(), self.gcn_adj.T.tocsr())
        return self._gather["gcn"]

    def relation_ops(self):
        """``[A_1 ... A_R]`` side by side, and its transpose, as CSR."""
        if "rel" not in self._gather:
            n = self.num_nodes
            if self.rel_adj:
                cat = sp.hstack(self.rel_adj).tocsr()
            else:
                cat = sp.csr_matrix((n, 0))
            self._gather["rel"] = (cat, cat.T.tocsr())
        return self._gather["rel"]

    def scatter_ops(self):
        """Sparse one-hot maps from edge entries to dst nodes, src nodes and relations."""
        if "dst" not in self._gather:
            nnz = len(self.edge_src)
            cols = np.arange(nnz)
            ones = np.ones(nnz)
            n = self.num_nodes
            r = self.edge_features.shape[0]
            self._gather["dst"] = sp.csr_matrix((ones, (self.edge_dst, cols)), shape=(n, nnz))
            self._gather["src"] = sp.csr_matrix((ones, (self.edge_src, cols)), shape=(n, nnz))
            self._gather["erel"] = sp.csr_matrix((ones, (self.edge_rel, cols)), shape=(r, nnz))
        return self._gather["dst"], self._gather["src"], self._gather["erel"]


def _check_X(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {X.shape}")
    return X


def normalized_adjacency(num_nodes: int, directed_edges) -> sp.csr_matrix:
    """D^{-1/2} (A + I) D^{-1/2} from a symmetric directed edge list."""
    e = np.asarray(directed_edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([e[:, 1], np.arange(num_nodes)])
    cols = np.concatenate([e[:, 0], np.arange(num_nodes)])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes))
    A.data[:] = 1.0  # collapse any duplicates
    deg = np.asarray(A.sum(axis=1)).ravel()
    d = 1.0 / np.sqrt(deg)
    return (sp.diags(d) @ A @ sp.diags(d)).tocsr()


def mean_adjacency(num_nodes: int, directed_edges) -> sp.csr_matrix:
    """Row i averages over in-neighbours j of edges (j, i); empty rows stay zero."""
    e = np.asarray(directed_edges, dtype=np.int64).reshape(-1, 2)
    A = sp.csr_matrix((np.ones(len(e)), (e[:, 1], e[:, 0])), shape=(num_nodes, num_nodes))
    deg = np.asarray(A.sum(axis=1)).ravel()
    return (sp.diags(1.0 / np.maximum(deg, 1.0)) @ A).tocsr()


def gcn_inputs(X, graph) -> GraphInputs:
    X = _check_X(X)
    if X.shape[0] != graph.node_count:
        raise ShapeError(f"features have {X.shape[0]} rows, graph has {graph.node_count} nodes")
    return GraphInputs(X, gcn_adj=normalized_adjacency(graph.node_count, graph.directed_edges()))


def rgcn_inputs(X, substructures: RelationSubstructures) -> GraphInputs:
    X = _check_X(X)
    n = X.shape[0]
    mats = []
    for er in substructures.as_arrays():
        if er.size and (er.min() < 0 or er.max() >= n):
            raise ShapeError("substructure edge endpoint outside the feature matrix")
        mats.append(mean_adjacency(n, er))
    return GraphInputs(X, rel_adj=mats)


def gine_inputs(X, duplicated_edges, relation_features) -> GraphInputs:
    X = _check_X(X)
    E = _check_X(relation_features)
    if duplicated_edges:
        arr = np.array([(s, d, r) for (s, d), r in duplicated_edges], dtype=np.int64)
    else:
        arr = np.zeros((0, 3), dtype=np.int64)
    if arr.size and arr[:, 2].max() >= E.shape[0]:
        raise IndexError(f"relation index {int(arr[:, 2].max())} has no relation feature row")
    return GraphInputs(X, edge_src=arr[:, 0], edge_dst=arr[:, 1], edge_rel=arr[:, 2], edge_features=E)
