import numpy as np
import pytest

from dlgp import Hyperparameters


def dense_posterior(X, y, hp, Xq):
    """Reference GP posterior by a plain dense solve (no Cholesky reuse)."""
    X = np.atleast_2d(X)
    Xq = np.atleast_2d(Xq)
    ls = np.asarray(hp.lengthscales)

    def k(A, B):
        diff = (A[:, None, :] - B[None, :, :]) / ls
        return hp.signal_variance * np.exp(-0.5 * np.sum(diff**2, axis=-1))

    K = k(X, X) + hp.noise_variance * np.eye(len(X))
    Ks = k(X, Xq)
    mean = Ks.T @ np.linalg.solve(K, y)
    var = hp.signal_variance - np.sum(Ks * np.linalg.solve(K, Ks), axis=0)
    return mean, var


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hp2():
    return Hyperparameters(1.0, [0.25, 0.25], 0.01)
