"""Linear one-vs-rest max-margin classification by seeded subgradient descent.

Training happens on internally standardized features for numeric stability;
the learned weights are folded back so the stored model scores raw inputs
directly: score_c(x) = w_c . x + b_c.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModelError
from . import _kernels

DEFAULT_REGULARIZATION = 1e-4
DEFAULT_EPOCHS = 10


def svm_fit_ovr(X, y, regularization=DEFAULT_REGULARIZATION,
                epochs=DEFAULT_EPOCHS, seed=0):
    """Train one binary separator per class; returns (class_set, weights, bias)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise ModelError("one-vs-rest needs at least 2 classes")
    if regularization <= 0.0:
        raise ModelError(f"regularization must be positive, got {regularization}")
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    standardized = (X - mu) / sigma
    ysign = np.where(y[np.newaxis, :] == classes[:, np.newaxis], 1.0, -1.0)
    w_std, b_std = _kernels.pegasos_ovr(
        np.ascontiguousarray(standardized), np.ascontiguousarray(ysign),
        float(regularization), int(epochs), int(seed) & 0xFFFFFFFF,
    )
    weights = w_std / sigma[np.newaxis, :]
    bias = b_std - weights @ mu
    return classes, weights, bias


def svm_scores(X, weights, bias) -> np.ndarray:
    return X @ weights.T + bias
