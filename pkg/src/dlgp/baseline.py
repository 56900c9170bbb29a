"""Dense exact GP regression, used as a reference for the tree.

Batch factorization with ``scipy.linalg`` and vectorized prediction over
many query points.  Meant for a few thousand training points at most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernel import Hyperparameters, kernel_cross, kernel_matrix
from .local_gp import jittered_cholesky


@dataclass
class ExactGp:
    X: np.ndarray
    y: np.ndarray
    L: np.ndarray
    alpha: np.ndarray
    hp: Hyperparameters
    jitter_used: float = 0.0


def fit_batch(X, y, hp: Hyperparameters) -> ExactGp:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[1] != hp.dim:
        raise ValueError(f"inputs have shape {X.shape}, expected (n, {hp.dim})")
    if X.shape[0] < 1 or X.shape[0] != y.size:
        raise ValueError(f"need matching non-empty inputs and targets, got {X.shape[0]} and {y.size}")
    K = kernel_matrix(X, hp)
    K[np.diag_indices_from(K)] += hp.noise_variance
    L, jitter = jittered_cholesky(K, hp.signal_variance)
    alpha = cho_solve((L, True), y, check_finite=False)
    return ExactGp(X.copy(), y.copy(), L, alpha, hp, jitter)


def predict_batch(model: ExactGp, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and latent variances at the rows of ``Xq``."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    Ks = kernel_cross(model.X, Xq, model.hp)
    means = Ks.T @ model.alpha
    V = solve_triangular(model.L, Ks, lower=True, check_finite=False)
    variances = model.hp.signal_variance - np.einsum("ij,ij->j", V, V)
    return means, np.maximum(variances, 0.0)
