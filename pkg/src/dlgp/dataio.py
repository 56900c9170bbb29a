"""CSV datasets and JSON experiment configuration.

CSV: comma separated, ``.`` decimal point, UTF-8, one optional header row
(detected when no field of the first row parses as a number).  Each row
holds ``d`` input columns followed by ``m`` target columns.  Row order is
the stream order.

Config keys (JSON object)::

    input_dim        int >= 1                      required
    hyperparameters  list of {signal_variance,     required, one per target
                     lengthscales, noise_variance}
    capacity         int >= 2                      default 100
    theta            float >= 0                    default 0.05
    strategy         "mean" | "median" | "midrange" default "mean"
    seed             int                           default 0
    checkpoints      int >= 1                      default 100
    report_path      str or null                   default null
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .kernel import Hyperparameters
from .partition import DivisionStrategy


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        Y = np.asarray(self.targets, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ValueError(f"inputs {X.shape} and targets {Y.shape} do not form a dataset")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def head(self, n: int) -> "Dataset":
        return Dataset(self.inputs[:n], self.targets[:n])


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, d: int, m: int) -> Dataset:
    """Read ``d`` input and ``m`` target columns from a CSV file."""
    width = d + m
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            if lineno == 1 and not any(_is_number(f) for f in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, found {len(row)}", row=lineno)
            values = []
            for col, text in enumerate(row, start=1):
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(f"not a number: {text!r}", row=lineno, column=col) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value {text!r}", row=lineno, column=col)
                values.append(v)
            rows.append(values)
    data = np.array(rows, dtype=float).reshape(-1, width)
    return Dataset(data[:, :d], data[:, d:])


def write_csv(dataset: Dataset, path, header: list[str] | None = None) -> None:
    """Write with ``repr`` floats so a reload is value-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for x, t in zip(dataset.inputs, dataset.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in t])


@dataclass
class ExperimentConfig:
    input_dim: int
    hyperparameters: list[Hyperparameters]
    capacity: int = 100
    theta: float = 0.05
    strategy: DivisionStrategy = DivisionStrategy.MEAN
    seed: int = 0
    checkpoints: int = 100
    report_path: str | None = None

    @property
    def output_dim(self) -> int:
        return len(self.hyperparameters)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hyperparameters": [hp.to_dict() for hp in self.hyperparameters],
            "capacity": self.capacity,
            "theta": self.theta,
            "strategy": self.strategy.value,
            "seed": self.seed,
            "checkpoints": self.checkpoints,
            "report_path": self.report_path,
        }


_KNOWN_KEYS = {
    "input_dim", "hyperparameters", "capacity", "theta",
    "strategy", "seed", "checkpoints", "report_path",
}


def _int(raw, name, minimum=None):
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(name, f"expected an integer, got {raw!r}")
    if minimum is not None and raw < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {raw}")
    return raw


def _real(raw, name):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(name, f"expected a number, got {raw!r}")
    if not math.isfinite(raw):
        raise ConfigError(name, f"must be finite, got {raw!r}")
    return float(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON config; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    for key in ("input_dim", "hyperparameters"):
        if key not in raw:
            raise ConfigError(key, "missing required field")

    d = _int(raw["input_dim"], "input_dim", minimum=1)
    hps_raw = raw["hyperparameters"]
    if not isinstance(hps_raw, list) or not hps_raw:
        raise ConfigError("hyperparameters", "expected a non-empty list")
    hps = []
    for k, entry in enumerate(hps_raw):
        base = f"hyperparameters[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(base, "expected an object")
        for key in ("signal_variance", "lengthscales", "noise_variance"):
            if key not in entry:
                raise ConfigError(f"{base}.{key}", "missing required field")
        sf2 = _real(entry["signal_variance"], f"{base}.signal_variance")
        if sf2 <= 0:
            raise ConfigError(f"{base}.signal_variance", f"must be > 0, got {sf2}")
        sn2 = _real(entry["noise_variance"], f"{base}.noise_variance")
        if sn2 < 0:
            raise ConfigError(f"{base}.noise_variance", f"must be >= 0, got {sn2}")
        ls = entry["lengthscales"]
        if not isinstance(ls, list):
            raise ConfigError(f"{base}.lengthscales", "expected a list")
        if len(ls) != d:
            raise ConfigError(f"{base}.lengthscales", f"expected {d} values (input_dim), got {len(ls)}")
        ls = [_real(v, f"{base}.lengthscales[{i}]") for i, v in enumerate(ls)]
        if any(v <= 0 for v in ls):
            raise ConfigError(f"{base}.lengthscales", "all lengthscales must be > 0")
        hps.append(Hyperparameters(sf2, ls, sn2))

    capacity = _int(raw.get("capacity", 100), "capacity", minimum=2)
    theta = _real(raw.get("theta", 0.05), "theta")
    if theta < 0:
        raise ConfigError("theta", f"must be >= 0, got {theta}")
    try:
        strategy = DivisionStrategy.parse(raw.get("strategy", "mean"))
    except ValueError as exc:
        raise ConfigError("strategy", str(exc)) from None
    seed = _int(raw.get("seed", 0), "seed", minimum=0)
    checkpoints = _int(raw.get("checkpoints", 100), "checkpoints", minimum=1)
    report_path = raw.get("report_path")
    if report_path is not None and not isinstance(report_path, str):
        raise ConfigError("report_path", f"expected a string, got {report_path!r}")
    return ExperimentConfig(d, hps, capacity, theta, strategy, seed, checkpoints, report_path)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return parse_config(raw)


def median_heuristic_hyperparameters(inputs, targets, noise_fraction=0.01, max_points=1000, seed=0):
    """Rough per-target hyperparameters without likelihood optimization.

    Lengthscales are the per-dimension median absolute difference over
    pairs of a random subsample, times ``sqrt(d)`` so that a typical pair
    has a scaled squared distance of order one.  The signal variance is the
    target variance and the noise variance ``noise_fraction`` of it.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    rng = np.random.default_rng(seed)
    idx = rng.choice(X.shape[0], size=min(max_points, X.shape[0]), replace=False)
    S = X[idx]
    iu = np.triu_indices(S.shape[0], k=1)
    ls = np.array([np.median(np.abs(S[:, j][:, None] - S[:, j][None, :])[iu]) for j in range(X.shape[1])])
    ls *= np.sqrt(X.shape[1])
    ls[~(ls > 0)] = 1.0
    out = []
    for k in range(Y.shape[1]):
        var = float(np.var(Y[:, k])) or 1.0
        out.append(Hyperparameters(var, ls, noise_fraction * var))
    return out
