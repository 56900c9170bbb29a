"""Evaluation protocols: checkpointed batch evaluation and online prediction.

Both runners build one :class:`~dlgp.tree.DlgpTree` per target column and
return report rows, one per (sample count, target).  Only model update and
model predict calls sit inside the timed regions.

Checkpoint scenario
    Train rows are streamed in order.  At each checkpoint the whole test set
    is evaluated; ``t_predict_mean_s`` times mean-only predictions and
    ``t_update_mean_s`` averages the updates since the previous checkpoint.

Online scenario
    Each sample is first predicted (mean and variance, timed together), then
    used for an update.  ``nmse`` and ``nll`` are cumulative over the stream;
    timings are moving averages over the last 1000 samples.  A row is emitted
    every 1000 samples and after the last one.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataio import Dataset, ExperimentConfig
from .errors import DegenerateTargets
from .metrics import MetricAccumulator, gaussian_nll, nmse, overlap_ratio
from .tree import DlgpTree, PredictiveDistribution

REPORT_HEADER = (
    "n", "target", "nmse", "nll", "t_update_mean_s", "t_predict_mean_s",
    "leaf_count", "division_count", "overlap_ratio", "active_leaves_mean",
)
TIMING_COLUMNS = ("t_update_mean_s", "t_predict_mean_s")
ONLINE_ROW_EVERY = 1000


@dataclass
class ReportRow:
    n: int
    target: int
    nmse: float | None
    nll: float | None
    t_update_mean_s: float | None
    t_predict_mean_s: float | None
    leaf_count: int
    division_count: int
    overlap_ratio: float | None
    active_leaves_mean: float | None

    def fields(self) -> list[str]:
        out = []
        for name in REPORT_HEADER:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


def write_report(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for row in rows:
        w.writerow(row.fields())


def report_text(rows) -> str:
    buf = io.StringIO()
    write_report(rows, buf)
    return buf.getvalue()


def checkpoint_schedule(n_train: int, checkpoints: int) -> list[int]:
    """Sample counts at which to evaluate: uniformly spaced, ending at ``n_train``.

    The first checkpoint is at ``min(100, n_train)`` samples.
    """
    if n_train <= 0:
        return []
    if checkpoints == 1:
        return [n_train]
    grid = np.rint(np.linspace(min(100, n_train), n_train, checkpoints)).astype(int)
    return sorted(set(int(v) for v in grid))


def _mean(values):
    return sum(values) / len(values) if values else None


def _make_tree(cfg: ExperimentConfig, k: int) -> DlgpTree:
    return DlgpTree(cfg.hyperparameters[k], cfg.capacity, cfg.theta, cfg.strategy, cfg.seed, stream=k)


def _check_dims(ds: Dataset, cfg: ExperimentConfig, what: str):
    if len(ds) and (ds.input_dim != cfg.input_dim or ds.output_dim != cfg.output_dim):
        raise ValueError(
            f"{what} has {ds.input_dim} inputs / {ds.output_dim} targets, "
            f"config expects {cfg.input_dim} / {cfg.output_dim}"
        )


def _run_targets(fn, n_targets, parallel):
    if parallel and n_targets > 1:
        with ThreadPoolExecutor(max_workers=n_targets) as pool:
            per_target = list(pool.map(fn, range(n_targets)))
    else:
        per_target = [fn(k) for k in range(n_targets)]
    rows = [row for rows in per_target for row in rows]
    rows.sort(key=lambda r: (r.n, r.target))
    return rows


def run_checkpoint_scenario(train: Dataset, test: Dataset, cfg: ExperimentConfig, parallel=False):
    _check_dims(train, cfg, "training data")
    _check_dims(test, cfg, "test data")
    schedule = checkpoint_schedule(len(train), cfg.checkpoints)
    if not schedule:
        return []

    def one_target(k):
        hp = cfg.hyperparameters[k]
        tree = _make_tree(cfg, k)
        X = train.inputs
        y = train.targets[:, k]
        Xt = test.inputs
        yt = test.targets[:, k]
        rows = []
        update_times = []
        next_cp = iter(schedule)
        cp = next(next_cp)
        clock = time.perf_counter
        for n in range(len(train)):
            t0 = clock()
            tree.update(X[n], y[n])
            update_times.append(clock() - t0)
            if n + 1 != cp:
                continue
            predict_times = []
            for x in Xt:
                t0 = clock()
                tree.predict_mean(x)
                predict_times.append(clock() - t0)
            means = np.empty(len(Xt))
            nlls = np.empty(len(Xt))
            active = np.empty(len(Xt))
            for q, x in enumerate(Xt):
                pd = tree.predict(x)
                means[q] = pd.mean
                nlls[q] = gaussian_nll(yt[q], pd.mean, pd.variance, hp.noise_variance)
                active[q] = pd.n_active
            try:
                err = nmse(means, yt) if len(Xt) >= 2 else None
            except DegenerateTargets:
                err = None
            rows.append(ReportRow(
                n + 1, k, err,
                float(nlls.mean()) if len(Xt) else None,
                _mean(update_times), _mean(predict_times),
                tree.leaf_count, tree.division_count,
                overlap_ratio(tree.overlap_point_count, tree.division_count, tree.capacity),
                float(active.mean()) if len(Xt) else None,
            ))
            update_times = []
            cp = next(next_cp, None)
        return rows

    return _run_targets(one_target, cfg.output_dim, parallel)


def run_online_scenario(stream: Dataset, cfg: ExperimentConfig, parallel=False):
    _check_dims(stream, cfg, "stream data")
    N = len(stream)
    if N == 0:
        return []

    def one_target(k):
        hp = cfg.hyperparameters[k]
        tree = _make_tree(cfg, k)
        prior = PredictiveDistribution(0.0, hp.signal_variance, 0)
        acc = MetricAccumulator()
        X = stream.inputs
        y = stream.targets[:, k]
        rows = []
        active = []
        clock = time.perf_counter
        for n in range(N):
            x = X[n]
            t0 = clock()
            pd = tree.predict(x) if tree.n_total else prior
            t_pred = clock() - t0
            t0 = clock()
            tree.update(x, y[n])
            t_upd = clock() - t0
            acc.online_update(y[n], pd.mean, pd.variance, hp.noise_variance, t_upd, t_pred)
            active.append(pd.n_active)
            if (n + 1) % ONLINE_ROW_EVERY == 0 or n + 1 == N:
                rows.append(ReportRow(
                    n + 1, k, acc.nmse, acc.nll, acc.update_time, acc.predict_time,
                    tree.leaf_count, tree.division_count,
                    overlap_ratio(tree.overlap_point_count, tree.division_count, tree.capacity),
                    _mean(active),
                ))
                active = []
        return rows

    return _run_targets(one_target, cfg.output_dim, parallel)


def strip_timing(text: str) -> str:
    """Report CSV with the timing columns removed, for reproducibility checks."""
    lines = text.splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h not in TIMING_COLUMNS]
    return "\n".join(",".join(line.split(",")[i] for i in keep) for line in lines)



