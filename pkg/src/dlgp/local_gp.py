"""Exact GP over one leaf's data, grown one point at a time.

The model keeps the lower Cholesky factor ``L`` of ``K(X, X) + noise * I``
and the weights ``alpha = L^T \\ (L \\ y)``.  Appending a point extends ``L``
by one row in O(n^2); ``alpha`` is then recomputed with two triangular solves.

Buffers are preallocated at the owning tree's capacity so that growth never
reallocates.  ``L`` lives in a C-ordered ``capacity x capacity`` buffer; the
BLAS ``trsv`` calls operate on its transposed (Fortran-ordered) view.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import blas

from .errors import NotPositiveDefinite
from .kernel import Hyperparameters, _kernel_vector, kernel_matrix

# Jitter ladder, in units of the signal variance.
JITTER_LEVELS = tuple(10.0 ** -k for k in range(10, 3, -1))
# A new Cholesky pivot (squared) at or below this fraction of the signal
# variance is treated as a factorization failure.
PIVOT_FLOOR = 1e-12


def jittered_cholesky(A: np.ndarray, signal_variance: float, min_jitter: float = 0.0):
    """Lower Cholesky factor of ``A``, escalating diagonal jitter on failure.

    The first attempt adds ``min_jitter``.  Each retry moves to the next
    level of ``JITTER_LEVELS * signal_variance`` above the previous jitter.

    Returns
    -------
    L : ndarray
        Lower-triangular factor of ``A + jitter * I``.
    jitter : float
        Total jitter that was added to the diagonal.

    Raises
    ------
    NotPositiveDefinite
        If the largest jitter level still fails.
    """
    n = A.shape[0]
    ladder = [lvl * signal_variance for lvl in JITTER_LEVELS]
    jitter = float(min_jitter)
    while True:
        M = A if jitter == 0.0 else A + jitter * np.eye(n)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            L = None
        if L is not None and np.all(np.diag(L) > 0) and np.all(np.isfinite(L)):
            return L, jitter
        higher = [j for j in ladder if j > jitter * (1 + 1e-12)]
        if not higher:
            raise NotPositiveDefinite(
                f"Cholesky failed for a {n}x{n} system with jitter up to {jitter:.3g}"
            )
        jitter = higher[0]


def _next_jitter(current: float, signal_variance: float) -> float:
    for lvl in JITTER_LEVELS:
        j = lvl * signal_variance
        if j > current * (1 + 1e-12):
            return j
    raise NotPositiveDefinite(f"jitter ladder exhausted at {current:.3g}")


class LocalModel:
    """Exact GP posterior for a bounded training set.

    Use :meth:`fit` to build a model from data and :meth:`insert` to append
    points.  ``capacity=None`` lifts the size bound and lets the buffers grow.
    """

    __slots__ = ("hp", "capacity", "n", "jitter_used", "_X", "_y", "_L", "_alpha")

    def __init__(self, hp: Hyperparameters, capacity: int | None = None):
        self.hp = hp
        self.capacity = capacity
        self.n = 0
        self.jitter_used = 0.0
        size = capacity if capacity is not None else 16
        self._allocate(size)

    def _allocate(self, size):
        d = self.hp.dim
        X = np.zeros((size, d))
        y = np.zeros(size)
        L = np.zeros((size, size))
        alpha = np.zeros(size)
        n = self.n
        if n:
            X[:n] = self._X[:n]
            y[:n] = self._y[:n]
            L[:n, :n] = self._L[:n, :n]
            alpha[:n] = self._alpha[:n]
        self._X, self._y, self._L, self._alpha = X, y, L, alpha

    # -- views -------------------------------------------------------------

    @property
    def X(self) -> np.ndarray:
        return self._X[: self.n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self.n]

    @property
    def L(self) -> np.ndarray:
        return self._L[: self.n, : self.n]

    @property
    def alpha(self) -> np.ndarray:
        return self._alpha[: self.n]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"LocalModel(n={self.n}, capacity={self.capacity}, jitter_used={self.jitter_used:g})"

    # -- construction ------------------------------------------------------

    @classmethod
    def fit(cls, X, y, hp: Hyperparameters, capacity: int | None = None, min_jitter: float = 0.0):
        """Full O(n^3) factorization of ``K(X, X) + noise * I``."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != hp.dim:
            raise ValueError(f"inputs have shape {X.shape}, expected (n, {hp.dim})")
        n = X.shape[0]
        if n < 1:
            raise ValueError("fit needs at least one point")
        if y.size != n:
            raise ValueError(f"{n} inputs but {y.size} targets")
        if capacity is not None and n > capacity:
            raise ValueError(f"{n} points exceed capacity {capacity}")
        model = cls(hp, capacity if capacity is not None else max(16, n))
        model.capacity = capacity
        model._set_data(X, y, min_jitter)
        return model

    def _set_data(self, X, y, min_jitter=0.0):
        n = X.shape[0]
        if n > self._L.shape[0]:
            self.n = 0
            self._allocate(max(n, 2 * self._L.shape[0]))
        K = kernel_matrix(X, self.hp)
        K[np.diag_indices(n)] += self.hp.noise_variance
        L, jitter = jittered_cholesky(K, self.hp.signal_variance, min_jitter)
        self._X[:n] = X
        self._y[:n] = y
        self._L[:n, :n] = L
        self.n = n
        self.jitter_used = jitter
        self._solve_alpha()

    def _solve_alpha(self):
        n = self.n
        Lt = self._L[:n, :n].T
        z = blas.dtrsv(Lt, self._y[:n], lower=0, trans=1)
        self._alpha[:n] = blas.dtrsv(Lt, z, lower=0, trans=0)

    def insert(self, x, y_new: float) -> "LocalModel":
        """Append one training pair by extending the Cholesky factor.

        If the new pivot is not safely positive, the whole factor is rebuilt
        with the next jitter level (see :func:`jittered_cholesky`).
        """
        hp = self.hp
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != hp.dim:
            raise ValueError(f"input has dimension {x.size}, expected {hp.dim}")
        n = self.n
        if self.capacity is not None and n >= self.capacity:
            raise ValueError(f"model is at capacity {self.capacity}")
        if n >= self._L.shape[0]:
            self._allocate(2 * self._L.shape[0])

        c = hp.signal_variance + hp.noise_variance + self.jitter_used
        if n:
            b = _kernel_vector(self._X[:n], x, hp)
            l = blas.dtrsv(self._L[:n, :n].T, b, lower=0, trans=1)
            pivot_sq = c - l @ l
        else:
            l = None
            pivot_sq = c

        if not pivot_sq > PIVOT_FLOOR * hp.signal_variance:
            X = np.vstack([self._X[:n], x])
            y = np.append(self._y[:n], y_new)
            self._set_data(X, y, _next_jitter(self.jitter_used, hp.signal_variance))
            return self

        self._X[n] = x
        self._y[n] = y_new
        if n:
            self._L[n, :n] = l
        self._L[n, n] = math.sqrt(pivot_sq)
        self.n = n + 1
        self._solve_alpha()
        return self

    # -- prediction --------------------------------------------------------

    def predict(self, x) -> tuple[float, float]:
        """Posterior mean and latent variance at ``x``."""
        n = self.n
        k = _kernel_vector(self._X[:n], x, self.hp)
        mean = float(k @ self._alpha[:n])
        v = blas.dtrsv(self._L[:n, :n].T, k, lower=0, trans=1)
        var = self.hp.signal_variance - float(v @ v)
        return mean, var if var > 0.0 else 0.0

    def predict_mean(self, x) -> float:
        n = self.n
        return float(_kernel_vector(self._X[:n], x, self.hp) @ self._alpha[:n])

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "L": self.L.tolist(),
            "alpha": self.alpha.tolist(),
            "jitter_used": self.jitter_used,
        }

    @classmethod
    def from_dict(cls, d: dict, hp: Hyperparameters, capacity: int | None = None) -> "LocalModel":
        X = np.asarray(d["X"], dtype=float).reshape(-1, hp.dim)
        n = X.shape[0]
        model = cls(hp, capacity if capacity is not None else max(16, n))
        model.capacity = capacity
        model._X[:n] = X
        model._y[:n] = d["y"]
        if n:
            model._L[:n, :n] = np.asarray(d["L"], dtype=float)
        model._alpha[:n] = d["alpha"]
        model.n = n
        model.jitter_used = float(d["jitter_used"])
        return model

