import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlgp import DegenerateTargets, DlgpTree, Hyperparameters, MetricAccumulator, gaussian_nll, nmse, overlap_ratio
from dlgp.metrics import TIMING_WINDOW, RunningMoments


def test_nmse_examples():
    t = np.array([0.3, -1.0, 2.0, 4.5])
    assert nmse(t, t) == 0.0
    assert nmse(np.full(4, t.mean()), t) == pytest.approx(1.0, rel=1e-15)
    assert nmse([1.0, 1.0], [0.0, 2.0]) == 1.0


def test_nmse_errors():
    with pytest.raises(DegenerateTargets):
        nmse([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(ValueError):
        nmse([1.0], [1.0, 2.0])


def test_nmse_shift_invariance(rng):
    p = rng.normal(size=100)
    t = rng.normal(size=100)
    base = nmse(p, t)
    for c in (-3.0, 0.5, 7.25):
        assert nmse(p + c, t + c) == pytest.approx(base, rel=1e-12)


def test_nll_closed_forms():
    assert gaussian_nll(0.3, 0.3, 1 / (2 * math.pi)) == pytest.approx(0.0, abs=1e-15)
    assert gaussian_nll(0.0, 0.0, 1.0) == pytest.approx(0.9189385332046727, rel=1e-15)
    assert gaussian_nll(0.0, 0.0, 0.4, 0.6) == gaussian_nll(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        gaussian_nll(0.0, 0.0, 0.0, 0.0)


def test_nll_minimized_at_squared_residual():
    y, mean = 1.7, 0.2
    grid = np.linspace(0.05, 6.0, 20001)
    values = [gaussian_nll(y, mean, s2) for s2 in grid]
    best = grid[int(np.argmin(values))]
    assert best == pytest.approx((y - mean) ** 2, abs=grid[1] - grid[0])


@settings(max_examples=200, deadline=None)
@given(y=st.floats(-100, 100), m=st.floats(-100, 100), c=st.floats(-100, 100), v=st.floats(1e-3, 10))
def test_nll_translation_invariant(y, m, c, v):
    a = gaussian_nll(y, m, v)
    b = gaussian_nll(y + c, m + c, v)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9 * (1 + (abs(y) + abs(c)) ** 2 / v))


def test_welford_matches_two_pass():
    rng = np.random.default_rng(7)
    values = rng.normal(3.0, 2.0, size=1_000_000)
    acc = RunningMoments()
    for v in values.tolist():
        acc.push(v)
    assert acc.mean == pytest.approx(values.mean(), rel=1e-10)
    assert acc.variance == pytest.approx(values.var(), rel=1e-10)


def test_online_nmse_missing_after_one_sample():
    acc = MetricAccumulator()
    assert acc.nmse is None and acc.nll is None and acc.update_time is None
    acc.online_update(1.0, 0.5, 0.1, 0.01, 1e-5, 2e-5)
    assert acc.nmse is None
    assert acc.nll == gaussian_nll(1.0, 0.5, 0.1, 0.01)


def test_online_perfect_predictions():
    acc = MetricAccumulator()
    for y in np.linspace(-1, 1, 50):
        acc.online_update(y, y, 0.1, 0.0)
    assert acc.nmse == 0.0


def test_online_alternating_targets_tend_to_one():
    acc = MetricAccumulator()
    for k in range(10_000):
        acc.online_update(2.0 * (k % 2), 1.0, 1.0, 0.0)
    # MSE = 1 and the running variance is 1 for an even count
    assert acc.nmse == pytest.approx(1.0, rel=1e-12)


def test_timing_moving_average():
    acc = MetricAccumulator()
    for k in range(TIMING_WINDOW + 500):
        acc.online_update(float(k), 0.0, 1.0, 0.0, float(k), 2.0 * k)
    window = np.arange(500, TIMING_WINDOW + 500, dtype=float)
    assert acc.update_time == pytest.approx(window.mean(), rel=1e-12)
    assert acc.predict_time == pytest.approx(2 * window.mean(), rel=1e-12)
    assert acc.count == TIMING_WINDOW + 500


def test_overlap_ratio_examples():
    assert overlap_ratio(0, 0, 100) is None
    assert overlap_ratio(0, 7, 100) == 0.0
    assert overlap_ratio(300, 3, 100) == 1.0


def test_overlap_ratio_zero_theta(rng):
    hp = Hyperparameters(1.0, [0.3, 0.3], 0.01)
    tree = DlgpTree(hp, capacity=50, theta=0.0)
    for x in rng.uniform(size=(600, 2)):
        tree.update(x, 0.0)
    assert tree.division_count > 5
    assert overlap_ratio(tree.overlap_point_count, tree.division_count, tree.capacity) == 0.0


def test_overlap_ratio_full_band(rng):
    hp = Hyperparameters(1.0, [0.3, 0.3], 0.01)
    tree = DlgpTree(hp, capacity=50, theta=10.0)
    for x in rng.uniform(size=(600, 2)):
        tree.update(x, 0.0)
    assert overlap_ratio(tree.overlap_point_count, tree.division_count, tree.capacity) == 1.0


def test_overlap_ratio_uniform_monte_carlo():
    hp = Hyperparameters(1.0, [0.3, 0.3], 0.01)
    ratios = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        tree = DlgpTree(hp, capacity=100, theta=0.05, seed=seed)
        for x in rng.uniform(size=(400, 2)):
            tree.update(x, 0.0)
        ratios.append(overlap_ratio(tree.overlap_point_count, tree.division_count, tree.capacity))
    assert np.mean(ratios) == pytest.approx(0.05, abs=0.02)
