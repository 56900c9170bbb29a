"""Self-checks comparing the tree against reference computations.

Every ``check_*`` function builds its own data from a seed, runs one
property against an independent reference (dense exact GP, unpruned
enumeration, closed forms) and returns a :class:`CheckResult`.  Sizes are
arguments so the same checks serve the quick ``dlgp verify`` run and the
full acceptance suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baseline import fit_batch, predict_batch
from .dataio import Dataset, ExperimentConfig
from .kernel import Hyperparameters
from .local_gp import LocalModel
from .metrics import gaussian_nll, nmse
from .scenarios import report_text, run_checkpoint_scenario, strip_timing
from .tree import DlgpTree, mixture_moments


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    budget: float | None = None
    data: dict = field(default_factory=dict, repr=False)

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.seconds <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        budget = f" / {self.budget:.0f}s" if self.budget is not None else ""
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s{budget})"


def _timed(name, budget, fn):
    t0 = time.perf_counter()
    passed, detail, data = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0, budget, data)


def sine_dataset(n, rng, noise_variance=0.01):
    """Inputs uniform on [0, 1]^2, target sin(2 pi x1) cos(pi x2) plus Gaussian noise."""
    X = rng.random((n, 2))
    f = np.sin(2 * np.pi * X[:, 0]) * np.cos(np.pi * X[:, 1])
    return X, f + np.sqrt(noise_variance) * rng.standard_normal(n)


SINE_HP = Hyperparameters(1.0, [0.25, 0.25], 0.01)


def grow_uniform_tree(n, capacity=100, theta=0.05, seed=0, hp=SINE_HP, strategy="mean"):
    rng = np.random.default_rng(seed)
    X, y = sine_dataset(n, rng, hp.noise_variance)
    tree = DlgpTree(hp, capacity, theta, strategy, seed=seed)
    for x, t in zip(X, y):
        tree.update(x, t)
    return tree


# -- AC-1 -------------------------------------------------------------------

def check_oracle_equivalence(n_datasets=50, capacity=100, n_test=100, seed=0, budget=10.0):
    """Undivided tree versus the dense exact GP on the same data."""

    def run():
        rng = np.random.default_rng(seed)
        worst_mean = worst_var = 0.0
        for k in range(n_datasets):
            d = (1, 2, 5)[k % 3]
            n = int(rng.integers(1, capacity + 1))
            hp = Hyperparameters(
                rng.uniform(0.5, 2.0), rng.uniform(0.3, 1.5, size=d), rng.uniform(0.01, 0.1)
            )
            X = rng.random((n, d))
            y = np.sin(3 * X).sum(axis=1) + 0.1 * rng.standard_normal(n)
            tree = DlgpTree(hp, capacity, 0.05, seed=k)
            for x, t in zip(X, y):
                tree.update(x, t)
            if tree.leaf_count != 1:
                return False, f"dataset {k} divided with n={n} <= capacity", {}
            Xq = rng.uniform(-0.25, 1.25, size=(n_test, d))
            ref_m, ref_v = predict_batch(fit_batch(X, y, hp), Xq)
            for q in range(n_test):
                pd = tree.predict(Xq[q])
                worst_mean = max(worst_mean, abs(pd.mean - ref_m[q]) / abs(ref_m[q]))
                worst_var = max(worst_var, abs(pd.variance - ref_v[q]) / abs(ref_v[q]))
        ok = worst_mean <= 1e-8 and worst_var <= 1e-8
        return ok, f"max rel err mean {worst_mean:.2e}, variance {worst_var:.2e} (tol 1e-8)", {}

    return _timed("AC-1 oracle equivalence (pre-division)", budget, run)


# -- AC-2 -------------------------------------------------------------------

RANK_ONE_SETTINGS = (
    Hyperparameters(1.0, [1.0] * 5, 0.1),
    Hyperparameters(2.0, [0.5] * 5, 0.05),
    Hyperparameters(0.5, [1.5, 1.0, 0.7, 1.2, 0.9], 0.01),
)


def check_rank_one(n_insert=200, settings=RANK_ONE_SETTINGS, seed=0, budget=5.0):
    """Sequential Cholesky appends versus a batch factorization."""

    def run():
        rng = np.random.default_rng(seed)
        worst_L = worst_a = 0.0
        jitter_free = True
        for hp in settings:
            X = rng.random((n_insert, hp.dim))
            y = rng.standard_normal(n_insert)
            model = LocalModel(hp, capacity=n_insert)
            for x, t in zip(X, y):
                model.insert(x, t)
            ref = fit_batch(X, y, hp)
            jitter_free &= model.jitter_used == 0.0 and ref.jitter_used == 0.0
            worst_L = max(worst_L, float(np.abs(model.L - ref.L).max()))
            worst_a = max(worst_a, float(np.abs(model.alpha - ref.alpha).max()))
        ok = jitter_free and worst_L < 1e-9 and worst_a < 1e-9
        return ok, f"max abs diff L {worst_L:.2e}, alpha {worst_a:.2e} (tol 1e-9)", {}

    return _timed("AC-2 rank-one insertion", budget, run)


# -- AC-3 -------------------------------------------------------------------

def check_normalization(capacity=100, min_leaves=63, n_test=1000, theta=0.05, seed=0, budget=10.0):
    """Leaf probabilities enumerated over all leaves sum to one."""

    def run():
        rng = np.random.default_rng(seed)
        tree = DlgpTree(SINE_HP, capacity, theta, seed=seed)
        while tree.leaf_count < min_leaves or tree.n_total < 10 * capacity:
            X, y = sine_dataset(capacity, rng)
            for x, t in zip(X, y):
                tree.update(x, t)
        leaves = tree.leaves()
        worst = 0.0
        for x in rng.random((n_test, 2)):
            total = sum(tree.leaf_probability(j, x) for j in leaves)
            worst = max(worst, abs(total - 1.0))
        detail = f"{tree.leaf_count} leaves, N={tree.n_total}, max |sum - 1| {worst:.2e} (tol 1e-12)"
        return worst <= 1e-12, detail, {}

    return _timed("AC-3 probability normalization", budget, run)


# -- AC-4 -------------------------------------------------------------------

def check_pruning(n_states=10, points_per_state=400, n_test=1000, capacity=100, theta=0.05,
                  seed=0, budget=30.0):
    """Pruned prediction equals the all-leaf enumeration."""

    def run():
        rng = np.random.default_rng(seed)
        tree = DlgpTree(SINE_HP, capacity, theta, seed=seed)
        worst_m = worst_v = 0.0
        for _ in range(n_states):
            X, y = sine_dataset(points_per_state, rng)
            for x, t in zip(X, y):
                tree.update(x, t)
            for x in rng.uniform(-0.1, 1.1, size=(n_test, 2)):
                a = tree.predict(x)
                b = tree.predict_full(x)
                worst_m = max(worst_m, abs(a.mean - b.mean))
                worst_v = max(worst_v, abs(a.variance - b.variance))
        ok = worst_m <= 1e-12 and worst_v <= 1e-12
        detail = (f"{n_states} states up to {tree.leaf_count} leaves "
                  f"({tree.division_count} divisions), max diff mean {worst_m:.1e}, "
                  f"variance {worst_v:.1e} (tol 1e-12)")
        return ok, detail, {}

    return _timed("AC-4 pruning soundness", budget, run)


# -- AC-5 -------------------------------------------------------------------

def check_mixture_algebra(n_points=4000, n_test=1000, theta=0.3, seed=0, budget=None):
    """Second-moment variance form against the spread form; variance never negative."""

    def run():
        m, v = mixture_moments([0.25, 0.75], [2.0, -2.0], [1.0, 1.0])
        hand_ok = abs(m + 1.0) < 1e-15 and abs(v - 4.0) < 1e-15
        rng = np.random.default_rng(seed)
        tree = grow_uniform_tree(n_points, theta=theta, seed=seed)
        worst = 0.0
        min_var = np.inf
        multi = 0
        for x in rng.uniform(-0.1, 1.1, size=(n_test, 2)):
            terms = tree.leaf_predictions(x)
            pd = tree.predict(x)
            spread = sum(w * s2 for _, w, _, s2 in terms) + sum(
                w * (mu - pd.mean) ** 2 for _, w, mu, _ in terms
            )
            worst = max(worst, abs(pd.variance - spread))
            min_var = min(min_var, pd.variance)
            multi += len(terms) > 1
        ok = hand_ok and worst <= 1e-10 and min_var >= 0.0
        detail = (f"hand case ({m:g}, {v:g}); {multi}/{n_test} points with >1 active leaf, "
                  f"max |eq - spread| {worst:.1e} (tol 1e-10), min variance {min_var:.2e}")
        return ok, detail, {}

    return _timed("AC-5 mixture algebra", budget, run)


# -- AC-6 / AC-9 --------------------------------------------------------------

def sine_experiment(n_train=20000, n_test=2000, seed=7, checkpoints=100):
    rng = np.random.default_rng(seed)
    Xtr, ytr = sine_dataset(n_train, rng)
    Xte, yte = sine_dataset(n_test, rng)
    cfg = ExperimentConfig(2, [SINE_HP], capacity=100, theta=0.05, seed=seed, checkpoints=checkpoints)
    return Dataset(Xtr, ytr), Dataset(Xte, yte), cfg


def check_regression(n_train=20000, n_test=2000, oracle_points=2000, seed=7, checkpoints=100,
                     budget=120.0):
    """Final test nMSE/NLL of the checkpoint scenario against a dense GP on a subsample."""

    def run():
        train, test, cfg = sine_experiment(n_train, n_test, seed, checkpoints)
        rows = run_checkpoint_scenario(train, test, cfg)
        final = rows[-1]
        sub = np.random.default_rng(seed + 1).choice(n_train, size=min(oracle_points, n_train),
                                                     replace=False)
        ref = fit_batch(train.inputs[sub], train.targets[sub, 0], SINE_HP)
        m, v = predict_batch(ref, test.inputs)
        yt = test.targets[:, 0]
        oracle_nmse = nmse(m, yt)
        oracle_nll = float(np.mean([gaussian_nll(a, b, c, SINE_HP.noise_variance)
                                    for a, b, c in zip(yt, m, v)]))
        ok = (final.nmse <= 0.05 and final.nll <= 0.0 and oracle_nmse <= 0.05
              and final.nmse <= 2.0 * oracle_nmse)
        detail = (f"N={final.n}: nMSE {final.nmse:.4f} (<= 0.05, oracle {oracle_nmse:.4f}, "
                  f"ratio {final.nmse / oracle_nmse:.2f} <= 2), NLL {final.nll:.3f} (<= 0; "
                  f"oracle {oracle_nll:.3f}), leaves {final.leaf_count}")
        return ok, detail, {"rows": rows, "report": report_text(rows)}

    return _timed("AC-6 regression sanity", budget, run)


def check_determinism(first_report=None, n_train=20000, n_test=2000, seed=7, checkpoints=100,
                      budget=None):
    """Two identically seeded runs give identical non-timing report columns."""

    def run():
        texts = [first_report] if first_report is not None else []
        while len(texts) < 2:
            train, test, cfg = sine_experiment(n_train, n_test, seed, checkpoints)
            texts.append(report_text(run_checkpoint_scenario(train, test, cfg)))
        a, b = (strip_timing(t) for t in texts)
        same = a == b
        return same, f"{len(a.splitlines()) - 1} rows, non-timing columns identical: {same}", {}

    return _timed("AC-9 determinism", budget, run)


# -- AC-7 -------------------------------------------------------------------

def check_update_scaling(n_total=200_000, early=(10_000, 20_000), late=(190_000, 200_000),
                         theta=0.01, capacity=100, seed=0, max_ratio=3.0, budget=300.0):
    """Mean update time late in the stream versus early on."""

    def run():
        rng = np.random.default_rng(seed)
        X, y = sine_dataset(n_total, rng)
        tree = DlgpTree(SINE_HP, capacity, theta, seed=seed)
        times = np.empty(n_total)
        clock = time.perf_counter
        for n in range(n_total):
            t0 = clock()
            tree.update(X[n], y[n])
            times[n] = clock() - t0
        t_early = float(times[early[0]:early[1]].mean())
        t_late = float(times[late[0]:late[1]].mean())
        ratio = t_late / t_early
        detail = (f"mean update {t_early * 1e6:.1f}us over {early}, {t_late * 1e6:.1f}us over "
                  f"{late}: ratio {ratio:.2f} (<= {max_ratio}), depth {tree.depth()}, "
                  f"leaves {tree.leaf_count}")
        return ratio <= max_ratio, detail, {"ratio": ratio}

    return _timed("AC-7 sublinear update cost", budget, run)


# -- AC-8 -------------------------------------------------------------------

def check_active_bound(n_total=50_000, theta=0.05, capacity=100, n_test=1000, seed=0,
                       quantile=0.95, budget=None):
    """Share of test points with at most 2^d active leaves."""

    def run():
        tree = grow_uniform_tree(n_total, capacity, theta, seed)
        counts = np.array([tree.active_leaf_count(x)
                           for x in np.random.default_rng(seed + 1).random((n_test, 2))])
        bound = 2 ** tree.dim
        share = float(np.mean(counts <= bound))
        hist = {int(k): int(v) for k, v in zip(*np.unique(counts, return_counts=True))}
        detail = (f"{share:.1%} of points with <= {bound} active (need {quantile:.0%}); "
                  f"mean {counts.mean():.2f}, distribution {hist}")
        return share >= quantile, detail, {"counts": counts}

    return _timed("AC-8 active-model bound", budget, run)


def run_all(full=False, seed=0):
    """Yield every check result in order; ``full`` uses acceptance-scale sizes."""
    if full:
        yield check_oracle_equivalence(seed=seed)
        yield check_rank_one(seed=seed)
        yield check_normalization(seed=seed)
        yield check_pruning(seed=seed)
        yield check_mixture_algebra(seed=seed)
        regression = check_regression()
        yield regression
        yield check_update_scaling(seed=seed)
        yield check_active_bound(seed=seed)
        yield check_determinism(regression.data.get("report"))
    else:
        yield check_oracle_equivalence(n_datasets=12, seed=seed)
        yield check_rank_one(seed=seed)
        yield check_normalization(seed=seed)
        yield check_pruning(n_states=3, n_test=200, seed=seed, budget=None)
        yield check_mixture_algebra(n_test=300, seed=seed)
        small = dict(n_train=3000, n_test=300, checkpoints=3)
        regression = check_regression(oracle_points=1000, budget=None, **small)
        yield regression
        yield check_update_scaling(n_total=40_000, early=(5_000, 10_000), late=(35_000, 40_000),
                                   seed=seed, budget=None)
        yield check_active_bound(n_total=20_000, seed=seed)
        yield check_determinism(regression.data.get("report"), **small)
