import math

import numpy as np
import pytest

from semedge.errors import DegeneratePrototypeError, ValidationError
from semedge.gnn.analysis import class_prototypes, inter_prototype_similarity


def test_orthogonal_classes():
    H = np.array([[1.0, 0], [2.0, 0], [0, 1.0]])
    assert inter_prototype_similarity(H, [0, 0, 1]) == pytest.approx(0.0)


def test_identical_prototypes():
    H = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert inter_prototype_similarity(H, [0, 1]) == pytest.approx(1.0)


def test_three_class_hand_value():
    s = 1 / math.sqrt(2)
    H = np.array([[1.0, 0.0], [0.0, 1.0], [s, s]])
    # pairwise cosines 0, 1/sqrt(2), 1/sqrt(2)
    assert inter_prototype_similarity(H, [0, 1, 2]) == pytest.approx((0 + s + s) / 3)
    assert inter_prototype_similarity(H, [0, 1, 2]) == pytest.approx(0.4714, abs=1e-4)


def test_prototypes_are_class_means_and_skip_unlabelled():
    H = np.array([[1.0, 0], [3.0, 0], [0, 2.0], [9.0, 9.0]])
    classes, P = class_prototypes(H, [0, 0, 1, -1])
    assert classes.tolist() == [0, 1]
    np.testing.assert_allclose(P, [[2.0, 0], [0, 2.0]])


def test_degenerate_cases():
    with pytest.raises(DegeneratePrototypeError):
        inter_prototype_similarity(np.array([[1.0, 0], [-1.0, 0], [0, 1.0]]), [0, 0, 1])
    with pytest.raises(ValidationError):
        inter_prototype_similarity(np.eye(2), [0, 0])
    with pytest.raises(ValidationError):
        inter_prototype_similarity(np.eye(2), [0])
