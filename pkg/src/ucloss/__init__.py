"""Label-distribution losses for ordinal regression, with exact gradients.

The package implements the unimodal-concentrated loss family and its
comparison losses over softmax label distributions, a finite-difference
gradient oracle, a synthetic ordinal dataset generator with per-instance
ambiguity, a small deterministic MLP trainer, evaluation metrics, and a CLI
for running the ablation experiments.
"""

from .dist import (
    as_prob_dist,
    expectation,
    gaussian_target,
    is_unimodal,
    softmax,
    variance,
)
from .losses import (
    LOSS_NAMES,
    LossConfig,
    LossEval,
    concentrated_loss,
    dldl_v2_loss,
    evaluate,
    evaluate_batch,
    kl_loss,
    mean_loss,
    mean_variance_loss,
    softmax_ce_loss,
    unimodal_concentrated_loss,
    unimodal_loss,
    variance_loss,
)

__all__ = [
    "LOSS_NAMES",
    "LossConfig",
    "LossEval",
    "as_prob_dist",
    "concentrated_loss",
    "dldl_v2_loss",
    "evaluate",
    "evaluate_batch",
    "expectation",
    "gaussian_target",
    "is_unimodal",
    "kl_loss",
    "mean_loss",
    "mean_variance_loss",
    "softmax",
    "softmax_ce_loss",
    "unimodal_concentrated_loss",
    "unimodal_loss",
    "variance",
    "variance_loss",
]

__version__ = "0.1.0"
