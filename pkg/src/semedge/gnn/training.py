"""Full-batch cross-entropy training, Adam, grid search and model files."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericsError, ParseError, ShapeError
from .inputs import GraphInputs
from .models import ModelSpec, Params, build_model, check_params

logger = logging.getLogger(__name__)

LEARNING_RATES = (0.001, 0.005, 0.01, 0.05)
LAYER_CHOICES = (2, 3)
DROPOUTS = (0.0, 0.1, 0.5, 0.8)
LEADERBOARD_FIELDS = ("arch", "lr", "layers", "dropout", "val_acc", "test_acc", "seed")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    epochs: int = 200
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")


def log_softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


def softmax(Z: np.ndarray) -> np.ndarray:
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def cross_entropy(Z: np.ndarray, labels, idx) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over ``idx`` and its gradient w.r.t. ``Z``."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ConfigError("loss needs at least one labelled node")
    y = np.asarray(labels)[idx]
    if np.any(y < 0) or np.any(y >= Z.shape[1]):
        raise ShapeError("label outside the logit columns")
    logp = log_softmax(Z[idx])
    loss = -float(logp[np.arange(idx.size), y].mean())
    dZ = np.zeros_like(Z)
    g = np.exp(logp)
    g[np.arange(idx.size), y] -= 1.0
    dZ[idx] = g / idx.size
    return loss, dZ


def loss_and_grad(model, params: Params, inputs: GraphInputs, labels, idx,
                  train: bool = False, rng=None) -> tuple[float, Params]:
    Z, cache = model.forward(params, inputs, train=train, rng=rng)
    loss, dZ = cross_entropy(Z, labels, idx)
    if not np.isfinite(loss):
        raise NumericsError("non-finite loss", epoch=None)
    return loss, model.backward(params, cache, dZ, inputs)


def accuracy(Z: np.ndarray, labels, idx) -> float:
    """Share of ``idx`` whose argmax logit (lowest index on ties) matches the label."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(Z[idx], axis=1) == np.asarray(labels)[idx]))


class Adam:
    def __init__(self, params: Params, config: TrainConfig):
        self.c = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        c = self.c
        self.t += 1
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        step = c.lr / b1t
        for k, p in params.items():
            g = grads[k]
            if c.weight_decay:
                g = g + c.weight_decay * p
            m, v = self.m[k], self.v[k]
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * (g * g)
            denom = np.sqrt(v / b2t)
            denom += c.eps
            p -= step * m / denom


@dataclass
class EvalRecord:
    logits: np.ndarray
    acc: dict[str, float]
    losses: list[float]
    best_epoch: int
    hyper: dict

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)


@dataclass
class TrainedModel:
    spec: ModelSpec
    config: TrainConfig
    params: Params
    in_dim: int
    edge_dim: int | None = None
    metrics: dict = field(default_factory=dict)

    @property
    def model(self):
        return build_model(self.spec, self.in_dim, self.edge_dim)

    def logits(self, inputs: GraphInputs) -> np.ndarray:
        return self.model.forward(self.params, inputs)[0]

    def hidden(self, inputs: GraphInputs) -> np.ndarray:
        """Representation fed to the final layer."""
        return self.model.forward(self.params, inputs)[1].hidden


def _edge_dim(inputs: GraphInputs):
    return None if inputs.edge_features is None else inputs.edge_features.shape[1]


def train(spec: ModelSpec, config: TrainConfig, inputs: GraphInputs, labels, split) -> tuple[TrainedModel, EvalRecord]:
    """Train with Adam and keep the snapshot with the best validation accuracy.

    Epoch 0 is the untrained model; ties go to the earliest epoch.
    """
    labels = np.asarray(labels)
    model = build_model(spec, inputs.X.shape[1], _edge_dim(inputs))
    rng = np.random.default_rng(spec.seed)
    params = model.init_params(rng)
    opt = Adam(params, config)

    def val_acc():
        return accuracy(model.forward(params, inputs)[0], labels, split.val)

    best_acc, best_epoch = val_acc(), 0
    best = {k: v.copy() for k, v in params.items()}
    losses = []
    for epoch in range(1, config.epochs + 1):
        Z, cache = model.forward(params, inputs, train=True, rng=rng)
        loss, dZ = cross_entropy(Z, labels, split.train)
        if not np.isfinite(loss):
            raise NumericsError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        losses.append(loss)
        opt.step(params, model.backward(params, cache, dZ, inputs))
        acc = val_acc()
        if acc > best_acc:
            best_acc, best_epoch = acc, epoch
            best = {k: v.copy() for k, v in params.items()}

    Z = model.forward(best, inputs)[0]
    acc = {part: accuracy(Z, labels, getattr(split, part)) for part in ("train", "val", "test")}
    hyper = {"arch": spec.arch, "lr": config.lr, "layers": spec.layers, "dropout": spec.dropout,
             "hidden": spec.hidden, "epochs": config.epochs, "seed": spec.seed}
    record = EvalRecord(Z, acc, losses, best_epoch, hyper)
    trained = TrainedModel(spec, config, best, inputs.X.shape[1], _edge_dim(inputs),
                           {**{f"{k}_acc": v for k, v in acc.items()}, "best_epoch": best_epoch})
    return trained, record


def default_grid(base: ModelSpec, epochs: int = 200):
    return [(replace(base, layers=L, dropout=d), TrainConfig(lr=lr, epochs=epochs))
            for lr, L, d in itertools.product(LEARNING_RATES, LAYER_CHOICES, DROPOUTS)]


@dataclass
class GridResult:
    best: TrainedModel
    best_record: EvalRecord
    leaderboard: list[dict]


def grid_search(grid, inputs: GraphInputs, labels, split) -> GridResult:
    """Train every (spec, config) pair and keep the best validation accuracy.

    The leaderboard is sorted by validation accuracy, descending; the sort
    is stable so equal scores keep grid order and the first one wins.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    rows, results = [], []
    for spec, config in grid:
        trained, record = train(spec, config, inputs, labels, split)
        results.append((trained, record))
        rows.append({"arch": spec.arch, "lr": config.lr, "layers": spec.layers, "dropout": spec.dropout,
                     "val_acc": record.acc["val"], "test_acc": record.acc["test"], "seed": spec.seed})
        logger.debug("%s lr=%g L=%d p=%g val=%.4f", spec.arch, config.lr, spec.layers, spec.dropout,
                     record.acc["val"])
    order = sorted(range(len(rows)), key=lambda k: -rows[k]["val_acc"])
    best_trained, best_record = results[order[0]]
    return GridResult(best_trained, best_record, [rows[k] for k in order])


def write_leaderboard(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LEADERBOARD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.6f}" if k.endswith("_acc") else r[k]) for k in LEADERBOARD_FIELDS})


# model files: u32 header length, JSON header, then little-endian f32 blob

def save_model(trained: TrainedModel, path) -> None:
    manifest, blobs, offset = [], [], 0
    for name in sorted(trained.params):
        arr = np.ascontiguousarray(trained.params[name], dtype="<f4")
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "spec": asdict(trained.spec),
        "config": asdict(trained.config),
        "seed": trained.spec.seed,
        "in_dim": trained.in_dim,
        "edge_dim": trained.edge_dim,
        "metrics": trained.metrics,
        "params": manifest,
    }
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(b"".join(blobs))


def load_model(path) -> TrainedModel:
    data = Path(path).read_bytes()
    try:
        (n,) = struct.unpack_from("<I", data, 0)
        header = json.loads(data[4:4 + n])
        blob = data[4 + n:]
        spec = ModelSpec(**header["spec"])
        config = TrainConfig(**header["config"])
        params = {}
        for entry in header["params"]:
            count = int(np.prod(entry["shape"], dtype=np.int64))
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
            params[entry["name"]] = arr.astype(np.float64).reshape(entry["shape"])
    except (struct.error, ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed model file {path}: {exc}", raw=None) from exc
    trained = TrainedModel(spec, config, params, header["in_dim"], header["edge_dim"], header["metrics"])
    check_params(trained.model, params)
    return trained
