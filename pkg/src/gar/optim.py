"""Optimizers, the stage-wise learning-rate schedule and the minibatch training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses as L
from .aggregate import GarConfig, gar_kl
from .autodiff import Node
from .network import NetworkSpec, ParameterStore, forward, init

log = logging.getLogger(__name__)

LOSS_KINDS = ("mae", "mse", "huber", "mae_pearson", "gar")


class TrainingDiverged(FloatingPointError):
    """Predictions or the loss became non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "sgd_momentum"
    lr0: float = 1e-2
    momentum: float = 0.9
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 256
    lr_decay_epochs: tuple[int, ...] = (50, 75)
    lr_decay_factor: float = 0.1
    seed: int = 0
    loss_kind: str = "gar"
    huber_delta: float = 1.0
    gar: GarConfig = field(default_factory=GarConfig)

    def __post_init__(self):
        object.__setattr__(self, "lr_decay_epochs", tuple(int(e) for e in self.lr_decay_epochs))
        object.__setattr__(self, "adam_betas", tuple(float(b) for b in self.adam_betas))
        if self.optimizer not in ("sgd_momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.uses_pairwise and self.batch_size < 2:
            raise ValueError("pairwise losses need batch_size >= 2")

    @property
    def uses_pairwise(self) -> bool:
        if self.loss_kind == "mae_pearson":
            return True
        return self.loss_kind == "gar" and any(self.gar.enabled[1:])


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for 0-based ``epoch``: one decay per milestone already reached."""
    k = sum(1 for m in cfg.lr_decay_epochs if epoch >= m)
    return cfg.lr0 * cfg.lr_decay_factor**k


def sgd_momentum_step(params: np.ndarray, grads: np.ndarray, state: dict, lr: float, momentum: float, weight_decay: float = 0.0) -> None:
    """``v <- m v + (g + wd theta)``; ``theta <- theta - lr v``, in place."""
    if params.shape != grads.shape:
        raise ValueError(f"parameter shape {params.shape} != gradient shape {grads.shape}")
    v = state.get("velocity")
    if v is None:
        v = state["velocity"] = np.zeros_like(params)
    g = grads + weight_decay * params if weight_decay else grads
    v *= momentum
    v += g
    params -= lr * v


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: dict,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    t: int | None = None,
) -> None:
    """Bias-corrected Adam with L2 weight decay folded into the gradient.

    ``t`` is the 1-based step index; when omitted it is tracked in ``state``.
    """
    if params.shape != grads.shape:
        raise ValueError(f"parameter shape {params.shape} != gradient shape {grads.shape}")
    if t is None:
        t = state.get("t", 0) + 1
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    state["t"] = t
    b1, b2 = betas
    m = state.setdefault("m", np.zeros_like(params))
    v = state.setdefault("v", np.zeros_like(params))
    g = grads + weight_decay * params if weight_decay else grads
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)


def build_loss(cfg: TrainConfig, batch: L.Batch) -> Node:
    kind = cfg.loss_kind
    if kind == "mae":
        return L.mae(batch)
    if kind == "mse":
        return L.mse(batch)
    if kind == "huber":
        return L.huber(batch, cfg.huber_delta)
    if kind == "mae_pearson":
        return L.mae_pearson_fused(batch)
    return gar_loss(batch, cfg.gar)


def gar_loss(batch: L.Batch, gcfg: GarConfig) -> Node:
    """MAE, error variance and 1 - Pearson, aggregated; only enabled terms are built."""
    makers = (L.mae, L.loss_diff, L.loss_diffnorm)
    parts = [make(batch) for make, on in zip(makers, gcfg.enabled) if on]
    sub = GarConfig(gcfg.alpha, gcfg.loss_floor, (True,) * len(parts))
    return gar_kl(parts, sub)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    lr: float
    mean_error: float
    error_std: float


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)
    skipped_batches: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "lr", "mean_error", "error_std"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.lr), repr(r.mean_error), repr(r.error_std)])


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Permutation of ``range(n)`` for one epoch, keyed on ``(seed, epoch)``."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, epoch], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).permutation(n)


def batches(n: int, batch_size: int, order: np.ndarray) -> list[np.ndarray]:
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


EpochCallback = Callable[[int, ParameterStore], None]


def train(
    x: np.ndarray,
    y: np.ndarray,
    spec: NetworkSpec,
    cfg: TrainConfig,
    params: ParameterStore | None = None,
    on_epoch_end: EpochCallback | None = None,
) -> tuple[ParameterStore, TrainingTrace]:
    """Shuffled minibatch training; ``on_epoch_end(epoch, params)`` runs after each epoch.

    Batches of one sample are skipped (and counted) when the loss has a
    pairwise term, since variance and correlation are undefined there.
    Raises :class:`TrainingDiverged` once predictions or the loss stop
    being finite.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if params is None:
        params = init(spec, cfg.seed)
    trace = TrainingTrace()
    state: dict = {}
    step = 0
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        losses_, means, stds = [], [], []
        for idx in batches(n, cfg.batch_size, epoch_order(n, cfg.seed, epoch)):
            if cfg.uses_pairwise and len(idx) < 2:
                trace.skipped_batches += 1
                log.warning("skipping a size-1 batch at epoch %d (pairwise loss)", epoch)
                continue
            params.zero_grad()
            pred = forward(params, x[idx])
            if not np.all(np.isfinite(pred.value)):
                raise TrainingDiverged(epoch)
            batch = L.Batch(pred, y[idx])
            loss = build_loss(cfg, batch)
            if not np.isfinite(loss.item()):
                raise TrainingDiverged(epoch)
            loss.backward()
            step += 1
            if cfg.optimizer == "adam":
                adam_step(params.flat, params.grad, state, lr, cfg.adam_betas, cfg.adam_eps, cfg.weight_decay, step)
            else:
                sgd_momentum_step(params.flat, params.grad, state, lr, cfg.momentum, cfg.weight_decay)
            err = pred.value - y[idx]
            losses_.append(loss.item())
            means.append(float(err.mean()))
            stds.append(float(err.std()))
        trace.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses_)) if losses_ else float("nan"),
                lr=lr,
                mean_error=float(np.mean(means)) if means else float("nan"),
                error_std=float(np.mean(stds)) if stds else float("nan"),
            )
        )
        if on_epoch_end is not None:
            on_epoch_end(epoch, params)
    return params, trace
