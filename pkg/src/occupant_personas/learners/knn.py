"""Brute-force k-nearest-neighbor classification with Euclidean distance."""

from __future__ import annotations

import numpy as np

from ..errors import InputError


def knn_predict(stored_x, stored_y, query, k: int):
    """Majority label among the k nearest stored rows to one query row.

    Neighbor rank ties break by stored-row index; vote ties break toward the
    smallest label code.
    """
    stored_x = np.asarray(stored_x, dtype=np.float64)
    stored_y = np.asarray(stored_y)
    query = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if k == 0:
        raise InputError("k must be at least 1")
    if k > stored_x.shape[0]:
        raise InputError(f"k={k} exceeds the {stored_x.shape[0]} stored rows")
    classes = np.unique(stored_y)
    y_idx = np.searchsorted(classes, stored_y)
    winner = _vote_idx(stored_x, y_idx, classes.size, query, k)[0]
    return classes[winner].item()


def _vote_idx(train_x, train_y_idx, n_classes, queries, k, chunk=256) -> np.ndarray:
    """Vectorized neighbor vote; returns winning class indices per query row."""
    n_train = train_x.shape[0]
    train_sq = np.einsum("ij,ij->i", train_x, train_x)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for lo in range(0, queries.shape[0], chunk):
        q = queries[lo:lo + chunk]
        d2 = q @ train_x.T
        d2 *= -2.0
        d2 += train_sq[np.newaxis, :]
        d2 += np.einsum("ij,ij->i", q, q)[:, np.newaxis]
        np.maximum(d2, 0.0, out=d2)
        if k < n_train:
            # stable ordering: distance first, stored index second
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        else:
            nearest = np.broadcast_to(np.arange(n_train), (q.shape[0], n_train))
        for r in range(q.shape[0]):
            counts = np.bincount(train_y_idx[nearest[r]], minlength=n_classes)
            out[lo + r] = int(np.argmax(counts))
    return out
