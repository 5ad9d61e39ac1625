"""Class-prototype separation of node representations."""
from __future__ import annotations

import numpy as np

from ..errors import DegeneratePrototypeError, ValidationError


def class_prototypes(H, labels) -> tuple[np.ndarray, np.ndarray]:
    """Mean representation per class present in ``labels`` (entries < 0 are skipped)."""
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(labels)
    if len(y) != H.shape[0]:
        raise ValidationError(f"{len(y)} labels for {H.shape[0]} rows")
    classes = np.unique(y[y >= 0])
    return classes, np.stack([H[y == c].mean(axis=0) for c in classes]) if classes.size else np.zeros((0, H.shape[1]))


def inter_prototype_similarity(H, labels) -> float:
    """Mean cosine similarity over all pairs of distinct class prototypes.

    Lower values mean the classes are easier to tell apart.
    """
    classes, P = class_prototypes(H, labels)
    if classes.size < 2:
        raise ValidationError("need at least two classes")
    norms = np.linalg.norm(P, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegeneratePrototypeError(f"prototype of class {int(classes[zero[0]])} has zero norm")
    Pn = P / norms[:, None]
    S = Pn @ Pn.T
    iu = np.triu_indices(len(classes), k=1)
    return float(S[iu].mean())
