"""Wall-clock timing of the linear and quadratic loss forms."""

from __future__ import annotations

import csv
import gc
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import losses as L
from .aggregate import GarConfig, gar_kl

LINEAR_LOSSES = ("mae", "loss_diff", "loss_diffnorm", "gar_kl")
QUADRATIC_LOSSES = ("pairwise_diff_quadratic", "pairwise_diffnorm_quadratic")
ALL_LOSSES = LINEAR_LOSSES + QUADRATIC_LOSSES


@dataclass(frozen=True)
class TimingRow:
    batch_size: int
    loss_name: str
    median_ns: int
    p10_ns: int
    p90_ns: int
    repeats: int

    def __post_init__(self):
        if self.repeats < 20:
            raise ValueError("repeats must be >= 20")
        if not self.p10_ns <= self.median_ns <= self.p90_ns:
            raise ValueError("percentiles out of order")


def _forward_backward(make: Callable[[L.Batch], ad.Node], f: np.ndarray, y: np.ndarray) -> Callable[[], float]:
    def run() -> float:
        pred = ad.variable(f.copy())
        loss = make(L.Batch(pred, y))
        loss.backward()
        return loss.item()

    return run


def _gar_all(batch: L.Batch) -> ad.Node:
    return gar_kl([L.mae(batch), L.loss_diff(batch), L.loss_diffnorm(batch)], GarConfig(alpha=1.0))


def timed_callables(f: np.ndarray, y: np.ndarray) -> dict[str, Callable[[], float]]:
    """One zero-argument callable per loss name; each returns the loss value."""
    return {
        "mae": _forward_backward(L.mae, f, y),
        "loss_diff": _forward_backward(L.loss_diff, f, y),
        "loss_diffnorm": _forward_backward(L.loss_diffnorm, f, y),
        "gar_kl": _forward_backward(_gar_all, f, y),
        "pairwise_diff_quadratic": lambda: L.pairwise_diff_quadratic((f, y)),
        "pairwise_diffnorm_quadratic": lambda: L.pairwise_diffnorm_quadratic((f, y)),
    }


def measure(fn: Callable[[], float], repeats: int, warmup: int = 3) -> np.ndarray:
    for _ in range(warmup):
        fn()
    out = np.empty(repeats, dtype=np.int64)
    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        for i in range(repeats):
            t0 = time.perf_counter_ns()
            fn()
            out[i] = time.perf_counter_ns() - t0
    finally:
        if gc_was_on:
            gc.enable()
    return out


def time_losses(
    sizes: Sequence[int],
    repeats: int = 20,
    seed: int = 0,
    names: Sequence[str] = ALL_LOSSES,
) -> list[TimingRow]:
    """Median / p10 / p90 nanoseconds per loss and batch size.

    Linear forms are timed forward plus backward, the quadratic oracles
    forward only.
    """
    if repeats < 20:
        raise ValueError("repeats must be >= 20")
    unknown = set(names) - set(ALL_LOSSES)
    if unknown:
        raise ValueError(f"unknown loss names {sorted(unknown)}")
    rows = []
    rng = np.random.default_rng(seed)
    for n in sizes:
        if n < 2:
            raise ValueError("batch sizes must be >= 2")
        f = rng.uniform(-10, 10, size=(n, 1))
        y = rng.uniform(-10, 10, size=(n, 1))
        fns = timed_callables(f, y)
        for name in names:
            t = measure(fns[name], repeats)
            p10, med, p90 = np.percentile(t, [10, 50, 90], method="nearest")
            rows.append(TimingRow(n, name, int(med), int(p10), int(p90), repeats))
    return rows


def write_csv(rows: Sequence[TimingRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch_size", "loss_name", "median_ns", "p10_ns", "p90_ns", "repeats"])
        for r in rows:
            w.writerow([r.batch_size, r.loss_name, r.median_ns, r.p10_ns, r.p90_ns, r.repeats])


def median_of(rows: Sequence[TimingRow], n: int, name: str) -> int:
    for r in rows:
        if r.batch_size == n and r.loss_name == name:
            return r.median_ns
    raise KeyError((n, name))
