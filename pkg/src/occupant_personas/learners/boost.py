"""Multiclass adaptive boosting of depth-1 stumps (the SAMME weight scheme)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, ModelError
from . import _kernels


class BoostStop(Exception):
    """Control-flow signal: the boosting loop must stop at this round."""


class PerfectStump(BoostStop):
    """The stump classified every weighted sample correctly (error 0)."""


class WeakStump(BoostStop):
    """The stump is no better than chance (error >= 1 - 1/K); round rejected."""


def samme_alpha(error: float, n_classes: int) -> float:
    """Round weight ln((1-w)/w) + ln(K-1) for an accepted error 0 < w < 1 - 1/K."""
    if n_classes < 2:
        raise InputError("round weight undefined for fewer than 2 classes")
    if not 0.0 < error < 1.0:
        raise InputError(f"round error must lie strictly inside (0, 1), got {error}")
    return math.log((1.0 - error) / error) + math.log(n_classes - 1)


def adaboost_round(weights, misclassified, n_classes: int) -> tuple[float, np.ndarray]:
    """One boosting step: compute alpha, upweight the missed samples, renormalize.

    Raises PerfectStump at error 0 and WeakStump at error >= 1 - 1/K; the
    trainer turns those into stop conditions.
    """
    w = np.asarray(weights, dtype=np.float64)
    miss = np.asarray(misclassified, dtype=bool)
    if w.ndim != 1 or miss.shape != w.shape:
        raise InputError("weights and misclassified mask must be equal-length vectors")
    if np.any(w < 0.0) or not math.isclose(float(w.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
        raise InputError("weights must be non-negative and sum to 1")
    if n_classes < 2:
        raise InputError("boosting needs at least 2 classes")
    error = float(w[miss].sum())
    if error == 0.0:
        raise PerfectStump("stump fits the weighted sample perfectly")
    if error >= 1.0 - 1.0 / n_classes:
        raise WeakStump(f"stump error {error:.4f} is not better than chance")
    alpha = samme_alpha(error, n_classes)
    updated = w.copy()
    updated[miss] *= math.exp(alpha)
    updated /= updated.sum()
    return alpha, updated


@dataclass
class Stump:
    """Single-split weak learner; column -1 predicts a constant class."""

    column: int
    threshold: float
    left_class: int   # class indices
    right_class: int

    def predict_idx(self, X: np.ndarray) -> np.ndarray:
        if self.column == -1:
            return np.full(X.shape[0], self.right_class, dtype=np.int64)
        return np.where(X[:, self.column] <= self.threshold,
                        self.left_class, self.right_class).astype(np.int64)


def fit_stump(X, y_idx, weights, sort_idx, n_classes) -> Stump:
    wl = np.zeros(n_classes, dtype=np.float64)
    wr = np.zeros(n_classes, dtype=np.float64)
    col, thr = _kernels.best_stump_split(X, y_idx, weights, sort_idx, n_classes, wl, wr)
    left_class = int(np.argmax(wl)) if col != -1 else 0
    right_class = int(np.argmax(wr))
    return Stump(column=int(col), threshold=float(thr),
                 left_class=left_class, right_class=right_class)


def fit_samme(X, y_idx, n_classes, n_rounds=50) -> tuple[list[Stump], list[float], list[float]]:
    """Boost stumps for up to n_rounds; returns (stumps, alphas, round errors).

    A perfect stump at any round becomes the sole ensemble member. A stump no
    better than chance rejects the round and stops; if that happens on the
    first round there is no usable ensemble and fitting fails.
    """
    n = X.shape[0]
    sort_idx = np.argsort(X, axis=0, kind="stable").astype(np.int64)
    w = np.full(n, 1.0 / n, dtype=np.float64)
    stumps: list[Stump] = []
    alphas: list[float] = []
    errors: list[float] = []
    for _ in range(n_rounds):
        stump = fit_stump(X, y_idx, w, sort_idx, n_classes)
        miss = stump.predict_idx(X) != y_idx
        round_error = float(w[miss].sum())
        try:
            alpha, w = adaboost_round(w, miss, n_classes)
        except PerfectStump:
            return [stump], [1.0], [0.0]
        except WeakStump as exc:
            if not stumps:
                raise ModelError(f"first boosting round unusable: {exc}") from exc
            break
        stumps.append(stump)
        alphas.append(alpha)
        errors.append(round_error)
    return stumps, alphas, errors


def ensemble_scores_idx(stumps: list[Stump], alphas, X: np.ndarray, n_classes: int) -> np.ndarray:
    scores = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    rows = np.arange(X.shape[0])
    for stump, alpha in zip(stumps, alphas):
        scores[rows, stump.predict_idx(X)] += alpha
    return scores
