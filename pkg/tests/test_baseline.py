import numpy as np
import pytest

from conftest import dense_posterior
from dlgp import DlgpTree, Hyperparameters, LocalModel, fit_batch, kernel_matrix, predict_batch


def test_matches_local_model(rng):
    hp = Hyperparameters(1.4, [0.7, 0.3, 1.1], 0.02)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    gp = fit_batch(X, y, hp)
    local = LocalModel.fit(X, y, hp)
    np.testing.assert_allclose(gp.L, local.L, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(gp.alpha, local.alpha, rtol=1e-9, atol=1e-12)
    x = rng.normal(size=3)
    means, variances = predict_batch(gp, x[None])
    np.testing.assert_allclose((means[0], variances[0]), local.predict(x), rtol=1e-10, atol=1e-14)


def test_large_reconstruction(rng):
    hp = Hyperparameters(1.0, [1.0] * 5, 0.1)
    X = rng.normal(size=(1000, 5))
    gp = fit_batch(X, rng.normal(size=1000), hp)
    K = kernel_matrix(X, hp) + hp.noise_variance * np.eye(1000)
    assert np.max(np.abs(gp.L @ gp.L.T - K)) < 1e-8


def test_zero_targets(rng):
    hp = Hyperparameters(1.0, [1.0, 1.0], 0.1)
    gp = fit_batch(rng.normal(size=(10, 2)), np.zeros(10), hp)
    np.testing.assert_array_equal(gp.alpha, np.zeros(10))


def test_interpolates_without_noise(rng):
    hp = Hyperparameters(1.0, [0.8, 0.8], 0.0)
    X = rng.uniform(size=(15, 2)) * 4
    y = rng.normal(size=15)
    means, _ = predict_batch(fit_batch(X, y, hp), X)
    np.testing.assert_allclose(means, y, atol=1e-7)


def test_far_field_prior(rng):
    hp = Hyperparameters(2.5, [0.5, 0.5], 0.01)
    gp = fit_batch(rng.uniform(size=(30, 2)), rng.normal(size=30), hp)
    means, variances = predict_batch(gp, rng.uniform(50, 60, size=(5, 2)))
    np.testing.assert_allclose(means, 0.0, atol=1e-12)
    np.testing.assert_allclose(variances, hp.signal_variance, rtol=1e-12)


def test_matches_dense_solve(rng):
    hp = Hyperparameters(0.8, [0.4, 0.9], 0.05)
    X = rng.uniform(size=(60, 2))
    y = rng.normal(size=60)
    Xq = rng.uniform(size=(40, 2))
    means, variances = predict_batch(fit_batch(X, y, hp), Xq)
    ref_m, ref_v = dense_posterior(X, y, hp, Xq)
    np.testing.assert_allclose(means, ref_m, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(variances, ref_v, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5])
def test_undivided_tree_agrees(d, rng):
    hp = Hyperparameters(1.0, rng.uniform(0.3, 1.5, size=d), 0.05)
    n = 80
    X = rng.uniform(size=(n, d))
    y = rng.normal(size=n)
    tree = DlgpTree(hp, capacity=100)
    for x, t in zip(X, y):
        tree.update(x, t)
    Xq = rng.uniform(size=(50, d))
    means, variances = predict_batch(fit_batch(X, y, hp), Xq)
    for q, x in enumerate(Xq):
        pd = tree.predict(x)
        assert pd.mean == pytest.approx(means[q], rel=1e-8, abs=1e-12)
        assert pd.variance == pytest.approx(variances[q], rel=1e-8, abs=1e-12)


def test_invalid_inputs():
    hp = Hyperparameters(1.0, [1.0], 0.1)
    with pytest.raises(ValueError):
        fit_batch(np.zeros((3, 2)), np.zeros(3), hp)
    with pytest.raises(ValueError):
        fit_batch(np.zeros((3, 1)), np.zeros(2), hp)
