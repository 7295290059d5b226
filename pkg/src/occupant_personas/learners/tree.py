"""Gini impurity and the CART decision tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from . import _kernels


def gini(labels) -> float:
    """Gini impurity 1 - sum(p_c^2) of a non-empty label vector."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InputError("gini undefined for an empty label vector")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / labels.size
    return float(1.0 - np.dot(p, p))


@dataclass
class Tree:
    """Flat-array binary tree; leaf[] holds class indices, -1 marks internal."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict_idx(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.int64)
        if X.shape[0]:
            _kernels.predict_tree(
                X, self.feature, self.threshold, self.left, self.right, self.leaf, out
            )
        return out


def grow_tree(X, y_idx, n_classes, max_depth=None, min_samples_split=2,
              mtry=None, seed=0, sample_idx=None) -> Tree:
    """Fit one gini tree; mtry < n_features enables per-node feature sampling."""
    n, d = X.shape
    if sample_idx is None:
        sample_idx = np.arange(n, dtype=np.int64)
    else:
        sample_idx = np.asarray(sample_idx, dtype=np.int64).copy()
    depth_cap = _kernels.UNLIMITED_DEPTH if max_depth is None else int(max_depth)
    mtry = d if mtry is None else int(mtry)
    m = sample_idx.shape[0]
    cap = 2 * m
    feature = np.empty(cap, np.int64)
    threshold = np.empty(cap, np.float64)
    left = np.empty(cap, np.int64)
    right = np.empty(cap, np.int64)
    leaf = np.empty(cap, np.int64)
    n_nodes = _kernels.build_tree(
        X, y_idx, sample_idx, n_classes, depth_cap, int(min_samples_split),
        mtry, seed, feature, threshold, left, right, leaf,
    )
    return Tree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        leaf=leaf[:n_nodes].copy(),
    )


def tree_to_doc(tree: Tree, class_set: np.ndarray) -> dict:
    """JSON-ready node arrays; leaf labels are raw class codes for audit."""
    labels = [None if f != -1 else int(class_set[c])
              for f, c in zip(tree.feature, tree.leaf)]
    return {
        "feature": [int(v) for v in tree.feature],
        "threshold": [float(v) for v in tree.threshold],
        "left": [int(v) for v in tree.left],
        "right": [int(v) for v in tree.right],
        "leaf_label": labels,
    }


def tree_from_doc(doc: dict, class_set: np.ndarray) -> Tree:
    feature = np.asarray(doc["feature"], dtype=np.int64)
    leaf = np.empty(feature.shape[0], dtype=np.int64)
    for i, (f, label) in enumerate(zip(doc["feature"], doc["leaf_label"])):
        leaf[i] = -1 if f != -1 else int(np.searchsorted(class_set, label))
    return Tree(
        feature=feature,
        threshold=np.asarray(doc["threshold"], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int64),
        right=np.asarray(doc["right"], dtype=np.int64),
        leaf=leaf,
    )
