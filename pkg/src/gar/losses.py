"""Pointwise and pairwise regression losses.

Every differentiable loss takes a :class:`Batch` and returns a scalar
:class:`~gar.autodiff.Node`.  The pairwise losses come in two flavours:

* ``pairwise_*_quadratic`` walk all N^2 pairs explicitly.  They are value
  only and exist as oracles.
* ``loss_diff`` / ``loss_diffnorm`` are the O(N) closed forms used in
  training: the variance of the prediction errors and one minus the
  Pearson correlation between predictions and targets.

Multi-target batches (shape ``N x T``) are handled column by column and the
per-target values are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node

DIFFNORM_EPS = 1e-12


class DegenerateBatchError(ValueError):
    """A normalised pairwise loss was asked for with a constant batch."""


@dataclass(frozen=True)
class Batch:
    """Predictions (a graph node) aligned with constant targets, both ``N x T``."""

    pred: Node
    target: np.ndarray

    def __post_init__(self):
        if self.pred.shape != self.target.shape:
            raise ValueError(f"prediction shape {self.pred.shape} != target shape {self.target.shape}")
        if self.target.ndim != 2 or self.target.shape[0] < 1:
            raise ValueError("a batch needs shape (N, T) with N >= 1")
        if not (np.all(np.isfinite(self.pred.value)) and np.all(np.isfinite(self.target))):
            raise ValueError("batch contains non-finite values")

    @classmethod
    def of(cls, pred, target) -> "Batch":
        """Build a batch from arrays or nodes; 1-d inputs become one target column."""
        if not isinstance(pred, Node):
            pred = ad.constant(pred)
        if pred.value.ndim == 1:
            pred = ad.reshape(pred, (-1, 1))
        target = np.asarray(target, dtype=np.float64)
        if target.ndim == 1:
            target = target.reshape(-1, 1)
        return cls(pred, target)

    @property
    def n(self) -> int:
        return self.target.shape[0]

    @property
    def n_targets(self) -> int:
        return self.target.shape[1]

    def columns(self):
        """Yield ``(prediction column node, target column array)`` pairs."""
        if self.n_targets == 1:
            yield self.pred, self.target
            return
        for j in range(self.n_targets):
            yield ad.column(self.pred, j), self.target[:, j : j + 1]


def _average(parts: list[Node]) -> Node:
    if len(parts) == 1:
        return parts[0]
    acc = parts[0]
    for p in parts[1:]:
        acc = acc + p
    return acc * (1.0 / len(parts))


def mae(batch: Batch) -> Node:
    """Mean absolute error over all N*T entries."""
    return ad.mean(ad.absolute(batch.pred - batch.target))


def mse(batch: Batch) -> Node:
    return ad.mean(ad.square(batch.pred - batch.target))


def huber(batch: Batch, delta: float) -> Node:
    """Mean Huber loss: 0.5 e^2 for |e| <= delta, delta (|e| - delta/2) beyond."""
    if not delta > 0:
        raise ValueError(f"huber delta must be positive, got {delta}")
    a = ad.absolute(batch.pred - batch.target)
    q = ad.minimum(a, delta)
    return ad.mean(0.5 * ad.square(q) + delta * (a - q))


def _variance_node(f: Node, y: np.ndarray) -> Node:
    """Biased variance of ``f - y`` as a single graph node."""
    c = f.value - y
    c = c - c.mean()
    n = c.size
    out = Node(np.dot(c.ravel(), c.ravel()) / n, (f,))

    def _bw(g):
        f._accumulate((2.0 * float(g) / n) * c)

    out._backward = _bw
    return out


def loss_diff(batch: Batch) -> Node:
    """Variance (divide-by-N) of the prediction errors, averaged over targets.

    Equal to the mean over all ordered pairs of half the squared mismatch
    between prediction differences and target differences.
    """
    return _average([_variance_node(f, y) for f, y in batch.columns()])


def _one_minus_corr_node(f: Node, y: np.ndarray, eps: float) -> Node:
    n = y.size
    yc = (y - y.mean()).ravel()
    fc = f.value.ravel() - f.value.mean()
    var_y = float(np.dot(yc, yc)) / n
    var_f = float(np.dot(fc, fc)) / n
    if eps == 0.0 and (var_y == 0.0 or var_f == 0.0):
        raise DegenerateBatchError("constant predictions or targets with eps=0")
    cov = float(np.dot(fc, yc)) / n
    s = math.sqrt((var_f + eps) * (var_y + eps))
    out = Node(1.0 - cov / s, (f,))

    def _bw(g):
        # d/df_i of -cov/s: -yc_i/(N s) + cov (var_y + eps) fc_i / (N s^3)
        k = float(g) / n
        grad = (k * cov * (var_y + eps) / s**3) * fc - (k / s) * yc
        f._accumulate(grad.reshape(f.shape))

    out._backward = _bw
    return out


def loss_diffnorm(batch: Batch, eps: float = DIFFNORM_EPS) -> Node:
    """``1 - Cov(f, y) / sqrt((Var f + eps)(Var y + eps))``, averaged over targets.

    With ``eps=0`` this is exactly one minus the Pearson correlation and a
    constant column raises :class:`DegenerateBatchError`.
    """
    if batch.n < 2:
        raise ValueError("loss_diffnorm needs at least two samples")
    return _average([_one_minus_corr_node(f, y, eps) for f, y in batch.columns()])


def pearson_value(f: np.ndarray, y: np.ndarray) -> float:
    """Plain Pearson correlation of two 1-d arrays (biased moments)."""
    fc = f - f.mean()
    yc = y - y.mean()
    return float(np.sum(fc * yc) / np.sqrt(np.sum(fc * fc) * np.sum(yc * yc)))


def mae_pearson_fused(batch: Batch) -> Node:
    """``beta * MAE + (1 - beta) * loss_diffnorm`` with beta the detached, clamped Pearson."""
    dn = loss_diffnorm(batch)
    rho = 1.0 - dn.item()
    beta = min(max(rho, 0.0), 1.0)
    return beta * mae(batch) + (1.0 - beta) * dn


def _targets(batch_or_arrays):
    if isinstance(batch_or_arrays, Batch):
        return batch_or_arrays.pred.value, batch_or_arrays.target
    f, y = batch_or_arrays
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return (f.reshape(-1, 1), y.reshape(-1, 1)) if f.ndim == 1 else (f, y)


_BLOCK = 256


def _row_blocks(n: int):
    # bounds memory at O(block * N) instead of O(N^2) for large batches
    for start in range(0, n, _BLOCK):
        yield slice(start, min(start + _BLOCK, n))


def pairwise_diff_quadratic(batch) -> float:
    """Explicit double sum over pairs of 0.5 * ((f_i - f_j) - (y_i - y_j))^2 / N^2."""
    f, y = _targets(batch)
    n = f.shape[0]
    out = []
    for j in range(f.shape[1]):
        fj, yj = f[:, j], y[:, j]
        acc = 0.0
        for rows in _row_blocks(n):
            r = (fj[rows, None] - fj[None, :]) - (yj[rows, None] - yj[None, :])
            acc += float(np.sum(r * r))
        out.append(0.5 * acc / (n * n))
    return float(np.mean(out))


def pairwise_diffnorm_quadratic(batch) -> float:
    """Distance between the unit-normalised pairwise-difference vectors, over N^2 pairs.

    Returns half the squared 2-norm ``||df/|df| - dy/|dy| ||^2``, which is
    the scale on which it equals ``1 - Pearson`` (the raw squared norm is
    twice that).
    """
    f, y = _targets(batch)
    n = f.shape[0]
    if n < 2:
        raise DegenerateBatchError("need at least two samples")
    out = []
    for j in range(f.shape[1]):
        fj, yj = f[:, j], y[:, j]
        sff = syy = 0.0
        for rows in _row_blocks(n):
            df = fj[rows, None] - fj[None, :]
            dy = yj[rows, None] - yj[None, :]
            sff += float(np.sum(df * df))
            syy += float(np.sum(dy * dy))
        if sff == 0.0 or syy == 0.0:
            raise DegenerateBatchError("pairwise differences are all zero")
        nf, ny = np.sqrt(sff), np.sqrt(syy)
        acc = 0.0
        for rows in _row_blocks(n):
            u = (fj[rows, None] - fj[None, :]) / nf - (yj[rows, None] - yj[None, :]) / ny
            acc += float(np.sum(u * u))
        out.append(0.5 * acc)
    return float(np.mean(out))


def mse_decomposition(batch) -> tuple[float, float]:
    """Split MSE into (variance of errors, squared mean error), averaged over targets."""
    f, y = _targets(batch)
    d = f - y
    m = d.mean(axis=0)
    var = np.mean((d - m) ** 2, axis=0)
    return float(np.mean(var)), float(np.mean(m * m))


@dataclass(frozen=True)
class LossBreakdown:
    l_mae: float
    l_diff: float
    l_diffnorm: float
    mean_error: float
    error_variance: float
    pearson: float


def breakdown(batch: Batch, eps: float = DIFFNORM_EPS) -> LossBreakdown:
    """The three GAR sub-losses plus error diagnostics, as plain floats."""
    f, y = batch.pred.value, batch.target
    d = f - y
    var, _ = mse_decomposition((f, y))
    rho = float(np.mean([pearson_value(f[:, j], y[:, j]) for j in range(f.shape[1])])) if batch.n > 1 else float("nan")
    return LossBreakdown(
        l_mae=float(np.mean(np.abs(d))),
        l_diff=loss_diff(batch).item(),
        l_diffnorm=loss_diffnorm(batch, eps).item() if batch.n > 1 else float("nan"),
        mean_error=float(np.mean(d)),
        error_variance=var,
        pearson=rho,
    )
