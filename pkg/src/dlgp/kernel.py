"""Squared-exponential ARD covariance function.

    k(a, b) = signal_variance * exp(-0.5 * sum_j ((a_j - b_j) / lengthscale_j)**2)

All evaluations accumulate the scaled squared distance first and apply a
single ``exp`` per pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Kernel and noise parameters for one output target.

    Parameters
    ----------
    signal_variance : float
        Prior variance of the latent function, ``> 0``.
    lengthscales : array_like
        One positive lengthscale per input dimension.
    noise_variance : float
        Observation noise variance, ``>= 0``.
    """

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=float).reshape(-1)
        if ls.size == 0:
            raise ValueError("lengthscales must be non-empty")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError(f"lengthscales must be finite and positive, got {ls}")
        sf2 = float(self.signal_variance)
        sn2 = float(self.noise_variance)
        if not np.isfinite(sf2) or sf2 <= 0:
            raise ValueError(f"signal_variance must be positive, got {sf2}")
        if not np.isfinite(sn2) or sn2 < 0:
            raise ValueError(f"noise_variance must be non-negative, got {sn2}")
        ls.setflags(write=False)
        inv = 1.0 / ls
        inv.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", sf2)
        object.__setattr__(self, "noise_variance", sn2)
        object.__setattr__(self, "_inv_lengthscales", inv)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @property
    def inv_lengthscales(self) -> np.ndarray:
        return self._inv_lengthscales

    def __eq__(self, other):
        if not isinstance(other, Hyperparameters):
            return NotImplemented
        return (
            self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
            and np.array_equal(self.lengthscales, other.lengthscales)
        )

    def __hash__(self):
        return hash((self.signal_variance, self.noise_variance, self.lengthscales.tobytes()))

    def to_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "lengthscales": self.lengthscales.tolist(),
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(d["signal_variance"], d["lengthscales"], d["noise_variance"])


def _check_point(x, hp: Hyperparameters) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != hp.dim:
        raise ValueError(f"input has dimension {x.size}, hyperparameters expect {hp.dim}")
    return x


def _check_matrix(X, hp: Hyperparameters) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, hp.dim)
    if X.ndim != 2 or X.shape[1] != hp.dim:
        raise ValueError(f"inputs have shape {X.shape}, expected (n, {hp.dim})")
    return X


def kernel_vector(X, x, hp: Hyperparameters) -> np.ndarray:
    """Return ``k(X_i, x)`` for every row of ``X``."""
    X = _check_matrix(X, hp)
    x = _check_point(x, hp)
    return _kernel_vector(X, x, hp)


def _kernel_vector(X: np.ndarray, x: np.ndarray, hp: Hyperparameters) -> np.ndarray:
    # unchecked fast path used inside the tree
    D = (X - x) * hp.inv_lengthscales
    return hp.signal_variance * np.exp(-0.5 * np.einsum("ij,ij->i", D, D))


def kernel_eval(a, b, hp: Hyperparameters) -> float:
    """Covariance between two single inputs."""
    a = _check_point(a, hp)
    b = _check_point(b, hp)
    return float(_kernel_vector(a[None, :], b, hp)[0])


def kernel_matrix(X, hp: Hyperparameters) -> np.ndarray:
    """Symmetric ``n x n`` Gram matrix with ``signal_variance`` on the diagonal."""
    X = _check_matrix(X, hp)
    n = X.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if n == 1:
        return np.full((1, 1), hp.signal_variance)
    r2 = squareform(pdist(X * hp.inv_lengthscales, "sqeuclidean"))
    return hp.signal_variance * np.exp(-0.5 * r2)


def kernel_cross(A, B, hp: Hyperparameters) -> np.ndarray:
    """``len(A) x len(B)`` cross-covariance matrix."""
    A = _check_matrix(A, hp)
    B = _check_matrix(B, hp)
    r2 = cdist(A * hp.inv_lengthscales, B * hp.inv_lengthscales, "sqeuclidean")
    return hp.signal_variance * np.exp(-0.5 * r2)
