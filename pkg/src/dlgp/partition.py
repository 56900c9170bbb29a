"""Axis-aligned division rules with a linear overlap band.

A rule ``(split_dim, position, overlap)`` sends an input to the high-side
child with probability

    0                                   x[j] < s - o/2
    (x[j] - s) / o + 1/2                s - o/2 <= x[j] <= s + o/2
    1                                   x[j] > s + o/2

and to the low-side child with the complementary probability.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DivisionStrategy(str, enum.Enum):
    """How the hyperplane position is chosen along the split dimension."""

    MEDIAN = "median"
    MEAN = "mean"
    MIDRANGE = "midrange"

    @classmethod
    def parse(cls, value) -> "DivisionStrategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown division strategy {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class DivisionRule:
    split_dim: int
    position: float
    overlap: float

    def __post_init__(self):
        if self.split_dim < 0:
            raise ValueError(f"split_dim must be non-negative, got {self.split_dim}")
        if not self.overlap >= 0:
            raise ValueError(f"overlap must be non-negative, got {self.overlap}")

    def probability(self, x) -> float:
        """Probability of routing ``x`` to the high-side child."""
        return p_eval(self, x)

    def in_band(self, X: np.ndarray) -> np.ndarray:
        """Mask of rows strictly inside the open overlap band."""
        return np.abs(X[:, self.split_dim] - self.position) < 0.5 * self.overlap

    def to_dict(self) -> dict:
        return {"split_dim": self.split_dim, "position": self.position, "overlap": self.overlap}

    @classmethod
    def from_dict(cls, d: dict) -> "DivisionRule":
        return cls(int(d["split_dim"]), float(d["position"]), float(d["overlap"]))


def compute_rule(D, theta: float, strategy=DivisionStrategy.MEAN) -> DivisionRule:
    """Division rule for the point set ``D`` (rows are inputs).

    The split dimension is the one with the largest spread (lowest index
    on ties); the band width is ``theta`` times that spread.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, d) array, got shape {D.shape}")
    if theta < 0:
        raise ValueError(f"theta must be non-negative, got {theta}")
    strategy = DivisionStrategy.parse(strategy)
    lo = D.min(axis=0)
    hi = D.max(axis=0)
    widths = hi - lo
    j = int(np.argmax(widths))  # first maximizer
    col = D[:, j]
    if strategy is DivisionStrategy.MEDIAN:
        s = float(np.sort(col)[(col.size - 1) // 2])
    elif strategy is DivisionStrategy.MEAN:
        s = float(col.sum() / col.size)
        # rounding can push the mean of a constant column off the data
        s = min(max(s, float(lo[j])), float(hi[j]))
    else:
        s = 0.5 * (float(lo[j]) + float(hi[j]))
    return DivisionRule(j, s, float(theta * widths[j]))


def p_eval(rule: DivisionRule, x) -> float:
    """High-side routing probability of a single input."""
    xj = float(x[rule.split_dim])
    s, o = rule.position, rule.overlap
    if o > 0.0:
        half = 0.5 * o
        if xj < s - half:
            return 0.0
        if xj > s + half:
            return 1.0
        p = (xj - s) / o + 0.5
        # clip rounding at the band edges
        return 0.0 if p < 0.0 else (1.0 if p > 1.0 else p)
    if xj < s:
        return 0.0
    if xj > s:
        return 1.0
    return 0.5


def p_eval_many(rule: DivisionRule, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`p_eval` over the rows of ``X``."""
    xj = np.asarray(X, dtype=float)[:, rule.split_dim]
    s, o = rule.position, rule.overlap
    if o > 0.0:
        p = np.clip((xj - s) / o + 0.5, 0.0, 1.0)
        half = 0.5 * o
        p[xj < s - half] = 0.0
        p[xj > s + half] = 1.0
        return p
    return np.where(xj < s, 0.0, np.where(xj > s, 1.0, 0.5))
