"""Probability-vector primitives for ordinal class distributions.

Classes are labeled 1..C throughout the public API; positions inside numpy
arrays are the usual 0-based offsets, which never leak into file formats.
All arithmetic runs in float64. Every function here is pure and stateless.
"""

from __future__ import annotations

import numpy as np

# A constructed distribution sums to 1 within this tolerance.
PROB_SUM_ATOL = 1e-9
# Constructors renormalize sums off by up to this much and reject anything worse.
PROB_RENORM_ATOL = 1e-6


def class_values(n_classes: int) -> np.ndarray:
    """Ordinal class labels 1..C as a float vector."""
    return np.arange(1, n_classes + 1, dtype=np.float64)


def as_prob_dist(values) -> np.ndarray:
    """Validate a probability vector: nonnegative, finite, summing to 1.

    Sums within ``PROB_RENORM_ATOL`` of 1 are renormalized (accumulated
    rounding is tolerated); anything further off raises ValueError so that
    real bugs are not masked.
    """
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError(f"probability vector must be 1-D with >= 2 entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(p < 0.0):
        raise ValueError("probability vector has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_RENORM_ATOL:
        raise ValueError(
            f"probabilities sum to {total!r}, outside renormalization tolerance {PROB_RENORM_ATOL}"
        )
    return p / total


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis, max-subtracted so any finite input is safe."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    """log(softmax(z)) over the last axis without underflowing to log(0)."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_vjp(p: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. probabilities back through softmax to the logits.

    For p = softmax(z): dL/dz_k = p_k * (g_k - sum_j g_j p_j). Works on
    batched (..., C) arrays; this is the full Jacobian product, including
    the off-diagonal terms.
    """
    inner = (grad_p * p).sum(axis=-1, keepdims=True)
    return p * (grad_p - inner)


def expectation(p):
    """E[j] = sum_j j * p_j over the last axis; lies in [1, C] for valid p."""
    p = np.asarray(p, dtype=np.float64)
    return (p * class_values(p.shape[-1])).sum(axis=-1)


def variance(p):
    """sum_j p_j * (j - E[j])^2 over the last axis; in [0, (C-1)^2 / 4]."""
    p = np.asarray(p, dtype=np.float64)
    idx = class_values(p.shape[-1])
    mean = (p * idx).sum(axis=-1, keepdims=True)
    return (p * (idx - mean) ** 2).sum(axis=-1)


def gaussian_target(label: int, sigma: float, n_classes: int) -> np.ndarray:
    """Discrete Gaussian bump centered at `label`, renormalized over 1..C.

    d_j is proportional to exp(-(j - label)^2 / (2 sigma^2)); the argmax is
    exactly `label` and the shape is symmetric about it where the support
    allows. Normalization is over the discrete support, so the entries sum
    to 1.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if not 1 <= label <= n_classes:
        raise ValueError(f"label {label} outside 1..{n_classes}")
    j = class_values(n_classes)
    w = np.exp(-((j - float(label)) ** 2) / (2.0 * sigma * sigma))
    return w / w.sum()


def is_unimodal(p, label: int) -> bool:
    """True iff p is nondecreasing up to `label` and nonincreasing after it.

    Ties (plateaus) count as unimodal. This is exactly the zero-loss set of
    the adjacent-pair hinge penalty, so the two must stay in sync.
    """
    p = np.asarray(p, dtype=np.float64)
    if not 1 <= label <= p.shape[0]:
        raise ValueError(f"label {label} outside 1..{p.shape[0]}")
    k = label - 1
    rising = bool(np.all(np.diff(p[: k + 1]) >= 0.0))
    falling = bool(np.all(np.diff(p[k:]) <= 0.0))
    return rising and falling
