"""Synthetic generators, CSV ingestion, splits and standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] = ()
    target_names: tuple[str, ...] = ()
    standardized: bool = False

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError(f"features {x.shape} and targets {y.shape} do not align")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise ValueError("a dataset needs N >= 1, d >= 1 and T >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains NaN or Inf")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)
        fn = tuple(self.feature_names) or tuple(f"x{i}" for i in range(x.shape[1]))
        tn = tuple(self.target_names) or tuple(f"y{i}" for i in range(y.shape[1]))
        if len(fn) != x.shape[1] or len(tn) != y.shape[1]:
            raise ValueError("column names do not match the array widths")
        object.__setattr__(self, "feature_names", fn)
        object.__setattr__(self, "target_names", tn)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], targets=self.targets[idx])


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    # start + step * i; the endpoint counts if it lies within half a step of stop
    count = math.floor((stop - start) / step + 0.5) + 1
    return start + step * np.arange(count, dtype=np.float64)


def gen_sine() -> Dataset:
    """``y = sin(x)`` on ``[-10 pi, 10 pi]`` with spacing 0.1 (629 points)."""
    x = _grid(-10 * math.pi, 10 * math.pi, 0.1)
    return Dataset(x, np.sin(x), ("x",), ("y",))


def gen_squared_sine() -> Dataset:
    """Square-root warped grid, ``y = x^2 sin(x) / mean(x^2)`` (20481 points).

    The warp ``x = sign(t) sqrt|t|`` makes samples dense near the origin.
    """
    t = _grid(-1024.0, 1024.0, 0.1)
    x = np.sign(t) * np.sqrt(np.abs(t))
    x2 = x * x
    return Dataset(x, x2 * np.sin(x) / x2.mean(), ("x",), ("y",))


SYNTHETIC = {"sine": gen_sine, "sqsine": gen_squared_sine, "squared_sine": gen_squared_sine}


class CsvFormatError(ValueError):
    pass


def load_csv(
    path,
    target_columns: Sequence[str],
    delimiter: str = ",",
    drop_columns: Sequence[str] = (),
) -> Dataset:
    """Read a header-first numeric CSV; named columns become targets, the rest features."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip().strip('"') for h in rows[0]]
    body = rows[1:]
    if not body:
        raise CsvFormatError(f"{path}: header but no data rows")
    for name in list(target_columns) + list(drop_columns):
        if name not in header:
            raise CsvFormatError(f"{path}: column {name!r} not found in header")
    if not target_columns:
        raise CsvFormatError("at least one target column is required")
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {r + 2} has {len(row)} cells, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise CsvFormatError(f"{path}: non-numeric cell {cell!r} at row {r + 2}, column {c + 1} ({header[c]})") from None
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise CsvFormatError(f"{path}: non-finite value at row {r + 2}, column {c + 1} ({header[c]})")
    t_idx = [header.index(t) for t in target_columns]
    skip = set(t_idx) | {header.index(d) for d in drop_columns}
    f_idx = [i for i in range(len(header)) if i not in skip]
    if not f_idx:
        raise CsvFormatError(f"{path}: no feature columns left")
    return Dataset(
        values[:, f_idx],
        values[:, t_idx],
        tuple(header[i] for i in f_idx),
        tuple(header[i] for i in t_idx),
    )


def write_csv(data: Dataset, path) -> None:
    """Features then targets, ``%.17g`` so that values survive a round trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, *data.target_names])
        for xr, yr in zip(data.features, data.targets):
            w.writerow([f"{v:.17g}" for v in (*xr, *yr)])


# UCI column layouts.  The Concrete file is expected converted to CSV with its
# original headers; the last column is the strength target.


@dataclass(frozen=True)
class Preset:
    filename: str
    delimiter: str = ","
    targets: tuple[str, ...] | None = None  # None: last column
    drop: tuple[str, ...] = ()


PRESETS = {
    "concrete": Preset("concrete.csv"),
    "wine_quality": Preset("winequality-white.csv", ";", ("quality",)),
    "parkinson_total": Preset("parkinsons_updrs.data", ",", ("total_UPDRS",), ("subject#", "motor_UPDRS")),
    "parkinson_motor": Preset("parkinsons_updrs.data", ",", ("motor_UPDRS",), ("subject#", "total_UPDRS")),
}


def load_preset(name: str, data_dir, path=None) -> Dataset:
    """Load a tabular benchmark from ``data_dir`` (or an explicit ``path``)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    path = Path(path) if path is not None else Path(data_dir) / p.filename
    if not path.exists():
        raise FileNotFoundError(f"{name}: expected data file at {path}")
    targets = p.targets
    if targets is None:
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh, delimiter=p.delimiter))
        targets = (header[-1].strip(),)
    return load_csv(path, targets, p.delimiter, p.drop)


@dataclass(frozen=True)
class SplitPlan:
    test_fraction: float = 0.2
    k_folds: int = 5
    seed: int = 123

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")


def split_and_fold(data: Dataset, plan: SplitPlan) -> tuple[Dataset, list[tuple[Dataset, Dataset]]]:
    """Seeded shuffle, first ceil(f N) rows to test, the rest cut into k contiguous folds."""
    n = data.n
    order = np.random.default_rng(plan.seed).permutation(n)
    n_test = math.ceil(plan.test_fraction * n)
    rest = order[n_test:]
    chunks = np.array_split(rest, plan.k_folds)
    if min(len(c) for c in chunks) < 2:
        raise ValueError(f"{n} rows leave fewer than 2 validation rows in some of {plan.k_folds} folds")
    folds = []
    for i, val in enumerate(chunks):
        train = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        folds.append((data.subset(train), data.subset(val)))
    return data.subset(order[:n_test]), folds


def holdout_half(data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Uniform random half for training; the other half (sorted by index) for evaluation."""
    order = np.random.default_rng(seed).permutation(data.n)
    half = data.n // 2
    return data.subset(np.sort(order[:half])), data.subset(np.sort(order[half:]))


@dataclass(frozen=True)
class StandardizeStats:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: np.ndarray | None = None
    target_std: np.ndarray | None = None

    def to_json(self) -> dict:
        out = {"feature_mean": self.feature_mean.tolist(), "feature_std": self.feature_std.tolist()}
        if self.target_mean is not None:
            out["target_mean"] = self.target_mean.tolist()
            out["target_std"] = self.target_std.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "StandardizeStats":
        tm = obj.get("target_mean")
        return cls(
            np.asarray(obj["feature_mean"], dtype=np.float64),
            np.asarray(obj["feature_std"], dtype=np.float64),
            None if tm is None else np.asarray(tm, dtype=np.float64),
            None if tm is None else np.asarray(obj["target_std"], dtype=np.float64),
        )

    def apply(self, data: Dataset) -> Dataset:
        if data.standardized:
            raise ValueError("dataset is already standardized")
        x = (data.features - self.feature_mean) / self.feature_std
        y = data.targets
        if self.target_mean is not None:
            y = (y - self.target_mean) / self.target_std
        return replace(data, features=x, targets=y, standardized=True)

    def invert_targets(self, y: np.ndarray) -> np.ndarray:
        if self.target_mean is None:
            return y
        return y * self.target_std + self.target_mean


def _moments(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = a.mean(axis=0)
    std = a.std(axis=0)
    # constant columns are centred but not rescaled
    return mean, np.where(std > 0, std, 1.0)


def standardize(train: Dataset, others: Sequence[Dataset] = (), targets_too: bool = False) -> tuple[list[Dataset], StandardizeStats]:
    """z-score every dataset with statistics of ``train`` only; returns ``[train, *others]``."""
    fm, fs = _moments(train.features)
    tm, ts = _moments(train.targets) if targets_too else (None, None)
    stats = StandardizeStats(fm, fs, tm, ts)
    return [stats.apply(d) for d in (train, *others)], stats
