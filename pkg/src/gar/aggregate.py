"""Robust log-domain aggregation of several sub-losses.

With a KL penalty towards the uniform distribution, the worst-case mixture
of log-losses has the closed form

    alpha * log( mean_i L_i ** (1 / alpha) )

i.e. the log of the power mean with exponent ``1/alpha``.  ``alpha = 1``
gives the arithmetic mean, ``alpha -> inf`` the geometric mean and
``alpha -> 0`` the maximum.

:func:`gar_kl` evaluates it inside the autodiff graph with every loss
divided by a detached anchor (the largest loss for ``alpha < 1``, the
smallest otherwise) so that the powers stay in range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import autodiff as ad
from .autodiff import Node

SUBLOSS_NAMES = ("mae", "diff", "diffnorm")

# exp() overflows past ~709.78; keep headroom for the sum over M terms.
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class GarConfig:
    alpha: float = 1.0
    loss_floor: float = 1e-12
    enabled: tuple[bool, ...] = field(default=(True, True, True))

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.loss_floor > 0:
            raise ValueError(f"loss_floor must be positive, got {self.loss_floor}")
        if not any(self.enabled):
            raise ValueError("at least one sub-loss must be enabled")

    @property
    def mask_label(self) -> str:
        return "+".join(n for n, on in zip(SUBLOSS_NAMES, self.enabled) if on)


def all_masks() -> list[tuple[bool, bool, bool]]:
    """The seven non-empty on/off patterns over (mae, diff, diffnorm)."""
    out = []
    for bits in range(1, 8):
        out.append((bool(bits & 1), bool(bits & 2), bool(bits & 4)))
    return out


def _anchor_index(logs: Sequence[float], alpha: float) -> int:
    """Index of the detached anchor, first index on ties."""
    hi = max(range(len(logs)), key=lambda i: (logs[i], -i))
    lo = min(range(len(logs)), key=lambda i: (logs[i], i))
    if alpha < 1.0:
        return hi
    # the small-anchor branch overflows when the spread is extreme; both anchors
    # give the same value, so fall back to the large one
    if (logs[hi] - logs[lo]) / alpha > _MAX_EXPONENT:
        return hi
    return lo


def gar_kl(losses: Sequence[Node], cfg: GarConfig) -> Node:
    """Aggregate scalar loss nodes; disabled entries of ``cfg.enabled`` are dropped.

    If ``cfg.enabled`` is shorter or longer than ``losses`` only the
    overlapping prefix is consulted; extra losses count as enabled.
    """
    mask = list(cfg.enabled) + [True] * max(0, len(losses) - len(cfg.enabled))
    active = [l if isinstance(l, Node) else ad.constant(l) for l, on in zip(losses, mask) if on]
    if not active:
        raise ValueError("no enabled losses to aggregate")
    for l in active:
        if math.isnan(l.item()):
            raise ValueError("NaN loss passed to gar_kl")
    floored = [ad.maximum(l, cfg.loss_floor) for l in active]
    logs = [ad.log(l) for l in floored]
    log_vals = [l.item() for l in logs]
    k = _anchor_index(log_vals, cfg.alpha)
    log_anchor = log_vals[k]
    inv_alpha = 1.0 / cfg.alpha
    m = len(active)
    acc = None
    for lg in logs:
        term = ad.exp((lg - log_anchor) * inv_alpha)
        acc = term if acc is None else acc + term
    return cfg.alpha * ad.log(acc * (1.0 / m)) + log_anchor


def _logsumexp(xs: Sequence[float]) -> float:
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


def gar_kl_reference(losses: Sequence[float], alpha: float) -> float:
    """Value-only ``alpha * log(mean L_i^(1/alpha))`` via log-sum-exp."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if any(not (l > 0) for l in losses):
        raise ValueError("gar_kl_reference needs strictly positive losses")
    z = [math.log(l) / alpha for l in losses]
    return alpha * (_logsumexp(z) - math.log(len(losses)))


@dataclass(frozen=True)
class LimitsReport:
    max_value: float
    arithmetic_mean: float
    geometric_mean: float
    at_small_alpha: float
    at_unit_alpha: float
    at_large_alpha: float

    @property
    def max_deviation(self) -> float:
        return abs(self.at_small_alpha - self.max_value) / self.max_value

    @property
    def arithmetic_deviation(self) -> float:
        return abs(self.at_unit_alpha - self.arithmetic_mean) / self.arithmetic_mean

    @property
    def geometric_deviation(self) -> float:
        return abs(self.at_large_alpha - self.geometric_mean) / self.geometric_mean


def gar_limits_check(losses: Sequence[float], small: float = 1e-3, large: float = 1e3) -> LimitsReport:
    """Compare the aggregate at small / unit / large alpha with max, mean and geometric mean."""
    m = len(losses)
    return LimitsReport(
        max_value=max(losses),
        arithmetic_mean=math.fsum(losses) / m,
        geometric_mean=math.exp(math.fsum(math.log(l) for l in losses) / m),
        at_small_alpha=math.exp(gar_kl_reference(losses, small)),
        at_unit_alpha=math.exp(gar_kl_reference(losses, 1.0)),
        at_large_alpha=math.exp(gar_kl_reference(losses, large)),
    )
