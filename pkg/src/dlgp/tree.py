"""Binary tree of local GPs built online by probabilistic data division.

Nodes are stored in a dict keyed by heap index: the children of node ``i``
are ``2i + 1`` (low side of the hyperplane) and ``2i + 2`` (high side).
Internal nodes hold a :class:`~dlgp.partition.DivisionRule`; leaves hold a
:class:`~dlgp.local_gp.LocalModel` with between 1 and ``capacity`` points.

A rule's probability ``p(x)`` is the chance of moving to the high child;
the low child receives ``1 - p(x)``.  The probability that ``x`` belongs to
a leaf is the product of these step probabilities along its branch, and the
predictive distribution is the resulting Gaussian mixture over leaves.

Randomness
----------
Each tree owns a ``numpy.random.Generator`` over the counter-based Philox
bit generator, seeded with ``SeedSequence(seed, spawn_key=(stream,))``.
Multi-output models use ``stream = target index``, so every target gets an
independent stream derived from one recorded seed.  Descent draws a uniform
only when ``0 < p(x) < 1``; a division draws one uniform per stored point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDivision, ModelEmpty
from .kernel import Hyperparameters
from .local_gp import LocalModel
from .partition import DivisionRule, DivisionStrategy, compute_rule, p_eval, p_eval_many

SNAPSHOT_FORMAT = "dlgp-tree"
SNAPSHOT_VERSION = 1

MAX_DIVISIONS_PER_UPDATE = 64
MAX_ASSIGNMENT_RETRIES = 16


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: float
    variance: float
    n_active: int = 0


def mixture_moments(weights, means, variances) -> tuple[float, float]:
    """Mean and variance of a Gaussian mixture, in the given term order.

    The variance uses ``sum w (var + mean^2) - mixture_mean^2`` and is
    clamped at zero against cancellation.  A single component of weight 1
    is returned unchanged.
    """
    if len(weights) == 1 and weights[0] == 1.0:
        return float(means[0]), float(variances[0])
    mu = 0.0
    second = 0.0
    for w, m, v in zip(weights, means, variances):
        mu += w * m
        second += w * (v + m * m)
    var = second - mu * mu
    return mu, var if var > 0.0 else 0.0


class DlgpTree:
    """Dividing local GP model for one scalar target.

    Parameters
    ----------
    hp : Hyperparameters
        Shared by every local model.
    capacity : int
        Maximum points per leaf; a full leaf is divided when the next point
        reaches it.
    theta : float
        Overlap ratio: band width as a fraction of the split-dimension spread.
    strategy : DivisionStrategy or str
        Hyperplane placement, ``"mean"`` (default), ``"median"`` or ``"midrange"``.
    seed, stream : int
        Random stream selection, see the module docstring.
    """

    def __init__(
        self,
        hp: Hyperparameters,
        capacity: int = 100,
        theta: float = 0.05,
        strategy=DivisionStrategy.MEAN,
        seed: int = 0,
        stream: int = 0,
    ):
        if int(capacity) != capacity or capacity < 2:
            raise ValueError(f"capacity must be an integer >= 2, got {capacity}")
        if not theta >= 0:
            raise ValueError(f"theta must be non-negative, got {theta}")
        self.hp = hp
        self.capacity = int(capacity)
        self.theta = float(theta)
        self.strategy = DivisionStrategy.parse(strategy)
        self.seed = int(seed)
        self.stream = int(stream)
        self.rng = make_rng(self.seed, self.stream)
        self.nodes: dict[int, DivisionRule | LocalModel] = {}
        self.n_total = 0
        self.division_count = 0
        self.overlap_point_count = 0
        self.leaf_count = 0

    def __repr__(self):
        return (
            f"DlgpTree(n_total={self.n_total}, leaves={self.leaf_count}, "
            f"capacity={self.capacity}, theta={self.theta}, strategy={self.strategy.value})"
        )

    @property
    def dim(self) -> int:
        return self.hp.dim

    def leaves(self) -> list[int]:
        return sorted(i for i, node in self.nodes.items() if type(node) is LocalModel)

    def depth(self) -> int:
        return max(((i + 1).bit_length() - 1 for i in self.nodes), default=0)

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.hp.dim:
            raise ValueError(f"input has dimension {x.size}, model expects {self.hp.dim}")
        return x

    # -- training ----------------------------------------------------------

    def _descend(self, i: int, x: np.ndarray) -> int:
        nodes = self.nodes
        node = nodes[i]
        while type(node) is DivisionRule:
            p = p_eval(node, x)
            if p >= 1.0 or (p > 0.0 and self.rng.random() < p):
                i = 2 * i + 2
            else:
                i = 2 * i + 1
            node = nodes[i]
        return i

    def update(self, x, y: float) -> None:
        """Add one training pair.

        The point is routed by random branch sampling.  A full leaf on the
        path is divided and the descent continues below it until a leaf with
        free capacity is reached.
        """
        x = self._point(x)
        y = float(y)
        if not self.nodes:
            self.nodes[0] = LocalModel.fit(x[None, :], [y], self.hp, self.capacity)
            self.leaf_count = 1
            self.n_total = 1
            return
        i = self._descend(0, x)
        divisions = 0
        while self.nodes[i].n >= self.capacity:
            if divisions == MAX_DIVISIONS_PER_UPDATE:
                raise DegenerateDivision(
                    f"{divisions} consecutive divisions did not free capacity at node {i}"
                )
            self.divide_leaf(i)
            divisions += 1
            i = self._descend(i, x)
        self.nodes[i].insert(x, y)
        self.n_total += 1

    def divide_leaf(self, i: int) -> None:
        """Split leaf ``i`` into children ``2i + 1`` and ``2i + 2``.

        Each stored point goes to the high child with probability ``p(x)``.
        An assignment leaving a child empty is redrawn; after
        ``MAX_ASSIGNMENT_RETRIES`` redraws the points are split at the median
        rank along the split dimension instead.
        """
        model = self.nodes[i]
        if type(model) is not LocalModel:
            raise ValueError(f"node {i} is not a leaf")
        X = model.X.copy()
        y = model.y.copy()
        n = X.shape[0]
        if n < 2:
            raise ValueError(f"cannot divide a leaf holding {n} point(s)")
        rule = compute_rule(X, self.theta, self.strategy)
        p = p_eval_many(rule, X)
        for _ in range(1 + MAX_ASSIGNMENT_RETRIES):
            high = self.rng.random(n) < p
            n_high = int(high.sum())
            if 0 < n_high < n:
                break
        else:
            order = np.argsort(X[:, rule.split_dim], kind="stable")
            high = np.zeros(n, dtype=bool)
            high[order[n // 2 :]] = True

        low = ~high
        self.nodes[2 * i + 1] = LocalModel.fit(X[low], y[low], self.hp, self.capacity)
        self.nodes[2 * i + 2] = LocalModel.fit(X[high], y[high], self.hp, self.capacity)
        self.nodes[i] = rule
        self.division_count += 1
        self.leaf_count += 1
        self.overlap_point_count += int(rule.in_band(X).sum())

    # -- probabilities -----------------------------------------------------

    def leaf_probability(self, j: int, x) -> float:
        """Marginal probability that ``x`` belongs to leaf ``j``.

        Multiplies the step probabilities of the ancestors
        ``(j + 1) // 2**k - 1`` for ``k = depth, ..., 1`` (root first).
        """
        if type(self.nodes.get(j)) is not LocalModel:
            raise ValueError(f"node {j} is not a leaf")
        x = self._point(x)
        depth = (j + 1).bit_length() - 1
        w = 1.0
        for k in range(depth, 0, -1):
            parent = ((j + 1) >> k) - 1
            child = ((j + 1) >> (k - 1)) - 1
            p = p_eval(self.nodes[parent], x)
            w *= (1.0 - p) if child == 2 * parent + 1 else p
        return w

    def active_leaves(self, x) -> list[tuple[int, float]]:
        """``(leaf, probability)`` pairs with positive probability, by leaf index.

        Subtrees are skipped as soon as the running branch probability is 0.
        """
        if not self.nodes:
            return []
        x = self._point(x)
        nodes = self.nodes
        out = []
        stack = [(0, 1.0)]
        while stack:
            i, w = stack.pop()
            node = nodes[i]
            if type(node) is LocalModel:
                out.append((i, w))
                continue
            p = p_eval(node, x)
            if p < 1.0:
                wl = w * (1.0 - p)
                if wl > 0.0:
                    stack.append((2 * i + 1, wl))
            if p > 0.0:
                wh = w * p
                if wh > 0.0:
                    stack.append((2 * i + 2, wh))
        out.sort()
        return out

    def active_leaf_count(self, x) -> int:
        return len(self.active_leaves(x))

    # -- prediction --------------------------------------------------------

    def leaf_predictions(self, x) -> list[tuple[int, float, float, float]]:
        """``(leaf, probability, mean, variance)`` for every active leaf."""
        x = self._point(x)
        out = []
        for j, w in self.active_leaves(x):
            m, v = self.nodes[j].predict(x)
            out.append((j, w, m, v))
        return out

    def predict(self, x) -> PredictiveDistribution:
        """Mixture mean and variance over the active leaves."""
        if not self.nodes:
            raise ModelEmpty("prediction requested from an empty tree")
        terms = self.leaf_predictions(x)
        mu, var = mixture_moments(
            [t[1] for t in terms], [t[2] for t in terms], [t[3] for t in terms]
        )
        return PredictiveDistribution(mu, var, len(terms))

    def predict_mean(self, x) -> float:
        """Mixture mean only; skips all variance computations."""
        if not self.nodes:
            raise ModelEmpty("prediction requested from an empty tree")
        x = self._point(x)
        mu = 0.0
        for j, w in self.active_leaves(x):
            mu += w * self.nodes[j].predict_mean(x)
        return mu

    def predict_full(self, x) -> PredictiveDistribution:
        """Unpruned reference prediction: evaluates every leaf and its probability."""
        if not self.nodes:
            raise ModelEmpty("prediction requested from an empty tree")
        x = self._point(x)
        weights, means, variances = [], [], []
        for j in self.leaves():
            weights.append(self.leaf_probability(j, x))
            m, v = self.nodes[j].predict(x)
            means.append(m)
            variances.append(v)
        mu, var = mixture_moments(weights, means, variances)
        return PredictiveDistribution(mu, var, sum(w > 0.0 for w in weights))

    # -- snapshots ---------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in sorted(self.nodes):
            node = self.nodes[i]
            if type(node) is LocalModel:
                nodes.append({"index": i, "leaf": node.to_dict()})
            else:
                nodes.append({"index": i, "rule": node.to_dict()})
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "hyperparameters": self.hp.to_dict(),
            "capacity": self.capacity,
            "theta": self.theta,
            "strategy": self.strategy.value,
            "seed": self.seed,
            "stream": self.stream,
            "counters": {
                "n_total": self.n_total,
                "division_count": self.division_count,
                "overlap_point_count": self.overlap_point_count,
                "leaf_count": self.leaf_count,
            },
            "rng_state": _encode_state(self.rng.bit_generator.state),
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DlgpTree":
        if d.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"not a {SNAPSHOT_FORMAT} snapshot")
        if d.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {d.get('version')}")
        hp = Hyperparameters.from_dict(d["hyperparameters"])
        tree = cls(hp, d["capacity"], d["theta"], d["strategy"], d["seed"], d["stream"])
        tree.rng.bit_generator.state = _decode_state(d["rng_state"])
        for entry in d["nodes"]:
            i = int(entry["index"])
            if "leaf" in entry:
                tree.nodes[i] = LocalModel.from_dict(entry["leaf"], hp, tree.capacity)
            else:
                tree.nodes[i] = DivisionRule.from_dict(entry["rule"])
        for key, value in d["counters"].items():
            setattr(tree, key, int(value))
        return tree

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "DlgpTree":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _encode_state(obj):
    if isinstance(obj, dict):
        return {k: _encode_state(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _decode_state(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _decode_state(v) for k, v in obj.items()}
    return obj


def make_target_trees(hps, capacity=100, theta=0.05, strategy=DivisionStrategy.MEAN, seed=0):
    """One independent tree per output target, sharing ``seed``."""
    return [DlgpTree(hp, capacity, theta, strategy, seed, stream=k) for k, hp in enumerate(hps)]
