"""Regression metrics: MAE, RMSE, Pearson, Spearman and R^2."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

METRIC_NAMES = ("mae", "rmse", "pearson", "spearman", "r2")
# True where larger is better
HIGHER_IS_BETTER = {"mae": False, "rmse": False, "pearson": True, "spearman": True, "r2": True}


def rank_average_ties(values) -> np.ndarray:
    """1-based ranks, tied values share the mean of their rank range."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot rank an empty array")
    return rankdata(v, method="average").astype(np.float64)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    den = math.sqrt(float(np.sum(ac * ac)) * float(np.sum(bc * bc)))
    if den == 0.0:
        return float("nan")
    return float(np.clip(np.sum(ac * bc) / den, -1.0, 1.0))


@dataclass
class MetricReport:
    """Per-target metric lists plus their unweighted averages.

    ``degenerate[j]`` marks targets whose truth has zero variance; their
    Pearson, Spearman and R^2 are NaN.
    """

    per_target: dict[str, list[float]]
    target_names: tuple[str, ...]
    degenerate: list[bool] = field(default_factory=list)

    def __post_init__(self):
        for j, (m, r) in enumerate(zip(self.per_target["mae"], self.per_target["rmse"])):
            # power-mean inequality, with slack for rounding
            if r < m * (1.0 - 1e-12):
                raise AssertionError(f"rmse < mae for target {j}: {r} < {m}")

    def average(self, name: str) -> float:
        vals = self.per_target[name]
        return float(np.mean(vals))

    @property
    def mae(self) -> float:
        return self.average("mae")

    @property
    def rmse(self) -> float:
        return self.average("rmse")

    @property
    def pearson(self) -> float:
        return self.average("pearson")

    @property
    def spearman(self) -> float:
        return self.average("spearman")

    @property
    def r2(self) -> float:
        return self.average("r2")

    def to_json(self) -> dict:
        out = {name: self.average(name) for name in METRIC_NAMES}
        out["per_target"] = {name: list(self.per_target[name]) for name in METRIC_NAMES}
        out["targets"] = list(self.target_names)
        out["degenerate"] = list(self.degenerate)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def csv_header(self) -> list[str]:
        return list(METRIC_NAMES)

    def csv_row(self) -> list[str]:
        return [repr(self.average(name)) for name in METRIC_NAMES]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        w.writerow(self.csv_row())
        return buf.getvalue()


def evaluate(pred, truth, target_names=None) -> MetricReport:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred.reshape(-1, 1)
    if truth.ndim == 1:
        truth = truth.reshape(-1, 1)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.shape[0] < 2:
        raise ValueError("metrics need at least two samples")
    per = {name: [] for name in METRIC_NAMES}
    degenerate = []
    for j in range(truth.shape[1]):
        p, t = pred[:, j], truth[:, j]
        e = p - t
        per["mae"].append(float(np.mean(np.abs(e))))
        per["rmse"].append(math.sqrt(float(np.mean(e * e))))
        sst = float(np.sum((t - t.mean()) ** 2))
        flat = sst == 0.0
        degenerate.append(flat)
        if flat:
            per["pearson"].append(float("nan"))
            per["spearman"].append(float("nan"))
            per["r2"].append(float("nan"))
            continue
        per["pearson"].append(_pearson(p, t))
        per["spearman"].append(_pearson(rank_average_ties(p), rank_average_ties(t)))
        per["r2"].append(1.0 - float(np.sum(e * e)) / sst)
    names = tuple(target_names) if target_names is not None else tuple(f"y{j}" for j in range(truth.shape[1]))
    return MetricReport(per, names, degenerate)
