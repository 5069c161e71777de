"""Gradient-aligned regression: pairwise label-difference losses, robust
log-domain aggregation and a small numpy MLP training stack."""

from .aggregate import GarConfig, gar_kl, gar_kl_reference, gar_limits_check
from .losses import (
    Batch,
    DegenerateBatchError,
    breakdown,
    huber,
    loss_diff,
    loss_diffnorm,
    mae,
    mae_pearson_fused,
    mse,
    mse_decomposition,
    pairwise_diff_quadratic,
    pairwise_diffnorm_quadratic,
)
from .metrics import MetricReport, evaluate, rank_average_ties
from .network import NetworkSpec, ParameterStore, forward, gradient_alignment_probe, init, predict
from .optim import TrainConfig, adam_step, sgd_momentum_step, train

__all__ = [
    "Batch",
    "DegenerateBatchError",
    "GarConfig",
    "MetricReport",
    "NetworkSpec",
    "ParameterStore",
    "TrainConfig",
    "adam_step",
    "breakdown",
    "evaluate",
    "forward",
    "gar_kl",
    "gar_kl_reference",
    "gar_limits_check",
    "gradient_alignment_probe",
    "huber",
    "init",
    "loss_diff",
    "loss_diffnorm",
    "mae",
    "mae_pearson_fused",
    "mse",
    "mse_decomposition",
    "pairwise_diff_quadratic",
    "pairwise_diffnorm_quadratic",
    "predict",
    "rank_average_ties",
    "sgd_momentum_step",
    "train",
]
