"""Gaussian linear discriminant classification with a pooled covariance.

Survey codes are frequently collinear, so the pooled covariance is ridge-
regularized by default: epsilon = 1e-6 * trace(cov) / n_features unless the
caller fixes a value. epsilon = 0 demands a genuinely full-rank covariance.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from ..errors import ModelError, SingularCovarianceError

AUTO_EPSILON_SCALE = 1e-6


def lda_fit(X, y_idx, n_classes, epsilon=None):
    """Class means, priors, and the Cholesky factor of the regularized covariance."""
    X = np.asarray(X, dtype=np.float64)
    y_idx = np.asarray(y_idx)
    n, d = X.shape
    if n_classes < 2:
        raise ModelError("discriminant analysis needs at least 2 classes")
    if n <= n_classes:
        raise ModelError(
            f"pooled covariance undefined: {n} samples for {n_classes} classes"
        )
    means = np.empty((n_classes, d), dtype=np.float64)
    priors = np.empty(n_classes, dtype=np.float64)
    scatter = np.zeros((d, d), dtype=np.float64)
    for c in range(n_classes):
        rows = X[y_idx == c]
        mu = rows.mean(axis=0)
        means[c] = mu
        priors[c] = rows.shape[0] / n
        centered = rows - mu
        scatter += centered.T @ centered
    cov = scatter / (n - n_classes)
    if epsilon is None:
        epsilon = AUTO_EPSILON_SCALE * float(np.trace(cov)) / d
    epsilon = float(epsilon)
    cov_reg = cov + epsilon * np.eye(d)
    if epsilon == 0.0 and np.linalg.matrix_rank(cov_reg) < d:
        raise SingularCovarianceError(
            "pooled covariance is singular; refit with epsilon > 0"
        )
    try:
        chol = np.linalg.cholesky(cov_reg)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            "pooled covariance is singular; refit with epsilon > 0"
        ) from None
    return means, priors, chol, epsilon


def lda_scores(X, means, priors, chol) -> np.ndarray:
    """Per-class discriminant scores x' S^-1 mu_c - mu_c' S^-1 mu_c / 2 + ln pi_c."""
    coef = cho_solve((chol, True), means.T)  # (d, K)
    intercept = -0.5 * np.einsum("kd,dk->k", means, coef) + np.log(priors)
    return X @ coef + intercept
