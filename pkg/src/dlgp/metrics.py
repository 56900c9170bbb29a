"""Error and likelihood metrics for batch and streaming evaluation."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .errors import DegenerateTargets

TIMING_WINDOW = 1000
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def nmse(predictions, targets) -> float:
    """Mean squared error divided by the population variance of ``targets``."""
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if p.size != t.size:
        raise ValueError(f"{p.size} predictions for {t.size} targets")
    if t.size < 2:
        raise ValueError("nmse needs at least two targets")
    var = float(np.var(t))
    if var == 0.0:
        raise DegenerateTargets("targets have zero variance")
    return float(np.mean((p - t) ** 2)) / var


def gaussian_nll(y: float, mean: float, variance: float, noise_variance: float = 0.0) -> float:
    """Negative log density of ``y`` under ``N(mean, variance + noise_variance)``."""
    s2 = variance + noise_variance
    if not s2 > 0.0:
        raise ValueError(f"total predictive variance must be positive, got {s2}")
    r = y - mean
    return _HALF_LOG_2PI + 0.5 * math.log(s2) + 0.5 * r * r / s2


def overlap_ratio(overlap_point_count: int, division_count: int, capacity: int) -> float | None:
    """Fraction of points that fell inside the overlap band over all divisions.

    ``None`` before the first division.
    """
    if division_count < 1:
        return None
    return overlap_point_count / (division_count * capacity)


class RunningMoments:
    """Welford mean/variance over a stream."""

    __slots__ = ("count", "mean", "_m2")

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (value - self.mean)

    @property
    def variance(self) -> float:
        """Population variance; 0 for fewer than two values."""
        return self._m2 / self.count if self.count else 0.0


class MetricAccumulator:
    """Cumulative online metrics for one predicted target.

    After each prediction of the next target, :meth:`online_update` records
    the squared error, the NLL and the update/predict timings.  Timing
    averages are taken over the last ``window`` samples.
    """

    def __init__(self, window: int = TIMING_WINDOW):
        self.targets = RunningMoments()
        self.sq_error_sum = 0.0
        self.nll_sum = 0.0
        self.update_times = deque(maxlen=window)
        self.predict_times = deque(maxlen=window)

    @property
    def count(self) -> int:
        return self.targets.count

    def online_update(self, y, mean, variance, noise_variance, update_time=None, predict_time=None):
        self.targets.push(float(y))
        r = float(y) - float(mean)
        self.sq_error_sum += r * r
        self.nll_sum += gaussian_nll(float(y), float(mean), float(variance), noise_variance)
        if update_time is not None:
            self.update_times.append(float(update_time))
        if predict_time is not None:
            self.predict_times.append(float(predict_time))

    @property
    def nmse(self) -> float | None:
        """Running MSE over the running target variance; ``None`` while that variance is 0."""
        var = self.targets.variance
        if var <= 0.0:
            return None
        return self.sq_error_sum / self.count / var

    @property
    def nll(self) -> float | None:
        return self.nll_sum / self.count if self.count else None

    @property
    def update_time(self) -> float | None:
        return sum(self.update_times) / len(self.update_times) if self.update_times else None

    @property
    def predict_time(self) -> float | None:
        return sum(self.predict_times) / len(self.predict_times) if self.predict_times else None
