"""Node and relation text features.

The built-in encoder is a hashed bag of words: lowercase, split on
non-alphanumeric runs, FNV-1a 64-bit hash per token, bucket = hash mod F,
count, then L2-normalize each row. External encoders plug in through
``load_embeddings``.
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ParseError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_TOKEN = re.compile(r"[^\W_]+")

DEFAULT_DIM = 256


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    encoder: str
    zero_rows: tuple[int, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def encode_texts(texts: Sequence[str], dim: int = DEFAULT_DIM) -> FeatureMatrix:
    if dim < 8:
        raise ValueError("feature dimension must be >= 8")
    out = np.zeros((len(texts), dim), dtype=np.float64)
    bucket_of: dict[str, int] = {}
    empty = []
    for row, text in enumerate(texts):
        for tok in tokenize(text):
            b = bucket_of.get(tok)
            if b is None:
                b = bucket_of[tok] = fnv1a_64(tok.encode("utf-8")) % dim
            out[row, b] += 1.0
        norm = np.linalg.norm(out[row])
        if norm > 0:
            out[row] /= norm
        else:
            empty.append(row)
    if empty:
        logger.warning("%d text(s) produced no tokens; their feature rows are zero", len(empty))
    return FeatureMatrix(out, encoder=f"hashed-bow-fnv1a64/{dim}", zero_rows=tuple(empty))


def load_embeddings(path, expected_rows: int) -> FeatureMatrix:
    """Read an embedding CSV with header ``row_id,v0,...,v{F-1}``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0].strip() != "row_id":
            raise ParseError(f"{path}: header must start with row_id", raw=",".join(header))
        dim = len(header) - 1
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != dim + 1:
                raise ShapeError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(rec)}")
            try:
                vals = [float(v) for v in rec[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}", raw=",".join(rec)) from exc
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if len(rows) != expected_rows:
        raise ShapeError(f"{path}: {len(rows)} rows, expected {expected_rows}")
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    zero = tuple(int(i) for i in np.flatnonzero(~values.any(axis=1)))
    return FeatureMatrix(values, encoder=f"file:{path.name}", zero_rows=zero)


def save_embeddings(features, path) -> None:
    values = np.asarray(features)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id"] + [f"v{k}" for k in range(values.shape[1])])
        for i, row in enumerate(values):
            w.writerow([i] + [repr(float(v)) for v in row])


def encode_relation_features(relation_set, encoder: Callable[[Sequence[str]], FeatureMatrix] | None = None
                             ) -> FeatureMatrix:
    """Encode each relation as ``"name: description"`` with the node encoder."""
    encoder = encoder or encode_texts
    return encoder([rel.as_line() for rel in relation_set])
