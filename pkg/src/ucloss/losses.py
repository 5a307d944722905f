"""Loss functions over softmax label distributions, with exact logit gradients.

Each loss is defined per sample on a logit vector z in R^C and a ground-truth
class y in 1..C; batch values are arithmetic means of per-sample values. The
gradients returned here are the exact derivatives of the value function,
differentiated through the full softmax Jacobian (and through the
distribution's expectation and variance where those appear). No
mean/variance-independence shortcut is used for optimization; the simplified
partials with respect to the estimation error eps = (yhat - y)^2 and the
variance v are reported as `aux` diagnostics instead.

Losses:

* ``unimodal``        -- hinge on adjacent-probability inversions around y:
                         sum_j max(0, -(p_j - p_{j+1}) * sign[j - y]) with
                         sign[t] = -1 for t < 0 and +1 otherwise, so the pair
                         at j == y is pushed to have its peak on y.
* ``concentrated``    -- negative log Gaussian likelihood of y under the
                         distribution's own mean and variance:
                         0.5*ln(v') + eps / (2 v'), v' = max(v, floor).
* ``unimodal_concentrated`` -- concentrated + lambda * unimodal.
* ``softmax``         -- cross entropy -ln p_y.
* ``mean``            -- 0.5 * (yhat - y)^2.
* ``variance``        -- v itself.
* ``mean_variance``   -- softmax + lambda1 * mean + lambda2 * variance.
* ``kl``              -- KL(d || p) against a fixed Gaussian target of width
                         sigma centered at y.
* ``dldl_v2``         -- kl + |yhat - y| with unit weight on the expectation
                         term (baseline convenience, not a tuned method).

Identifiers compose with '+', e.g. "softmax+concentrated" or
"unimodal+mean_variance". Inside a composition each part enters with its
conventional weight: ``unimodal`` is scaled by ``lambda``, ``mean`` by
``lambda1``, ``variance`` by ``lambda2``, everything else by 1, and
``mean_variance`` expands to ``mean+variance``. Hence
"softmax+mean_variance" is the standalone ``mean_variance`` loss and
"unimodal+concentrated" is the standalone ``unimodal_concentrated`` loss.
Standalone single names always use their own definition with unit weight.

Subgradient convention: 0 at every max(0, .) and |.| kink and at the
variance floor, so the zero-loss set of the hinge is an exact fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dist import class_values, gaussian_target, log_softmax, softmax, softmax_vjp

LOSS_NAMES = (
    "unimodal",
    "concentrated",
    "unimodal_concentrated",
    "softmax",
    "mean",
    "variance",
    "mean_variance",
    "kl",
    "dldl_v2",
)


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters shared by the loss family.

    lam weights the unimodal term against the concentrated term (default
    1000). lambda1/lambda2 weight the mean and variance terms of the
    mean-variance combination. sigma is the fixed target width for the KL
    baselines. variance_floor clamps the predicted variance inside the
    concentrated loss before the log and the division; without it a one-hot
    output sends the loss to -inf and its gradient diverges.
    """

    lam: float = 1000.0
    lambda1: float = 0.2
    lambda2: float = 0.05
    sigma: float = 1.0
    variance_floor: float = 1e-4

    def __post_init__(self):
        for name in ("lam", "lambda1", "lambda2", "sigma", "variance_floor"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.lam < 0 or self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.variance_floor <= 0:
            raise ValueError(f"variance_floor must be > 0, got {self.variance_floor}")


@dataclass
class LossEval:
    """Per-sample loss value, exact gradient w.r.t. the logits, and diagnostics.

    aux may carry yhat, v, eps plus the analytic partials dloss_dv and
    dloss_deps where the loss defines them (v is reported after the floor
    for the concentrated loss, raw otherwise).
    """

    value: float
    grad_z: np.ndarray
    aux: dict[str, float] = field(default_factory=dict)


@dataclass
class BatchLossEval:
    """Vectorized evaluation over a batch: per-sample values and gradients."""

    values: np.ndarray  # (B,)
    grad_z: np.ndarray  # (B, C)
    aux: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mean_value(self) -> float:
        return float(self.values.mean())


# aux keys that are weighted-summed when losses are composed; the rest are
# state descriptors shared by all parts and simply merged.
_PARTIAL_AUX = ("dloss_dv", "dloss_deps")


def _moments(p: np.ndarray):
    idx = class_values(p.shape[-1])
    yhat = (p * idx).sum(axis=-1)
    dev = idx[None, :] - yhat[:, None]
    v = (p * dev**2).sum(axis=-1)
    return yhat, dev, v


def unimodal_value_from_probs(p, label: int) -> float:
    """Hinge value evaluated directly on a probability vector.

    Useful for checking the zero-set characterization on simplex points that
    are not reachable as softmax outputs (entries exactly 0).
    """
    p = np.asarray(p, dtype=np.float64)
    diff = p[:-1] - p[1:]
    pair = np.arange(1, p.shape[0], dtype=np.float64)
    sign = np.where(pair < label, -1.0, 1.0)
    arg = -diff * sign
    return float(np.where(arg > 0.0, arg, 0.0).sum())


def _unimodal(Z, y, cfg):
    p = softmax(Z)
    C = p.shape[-1]
    diff = p[:, :-1] - p[:, 1:]
    pair = np.arange(1, C, dtype=np.float64)
    sign = np.where(pair[None, :] < y[:, None], -1.0, 1.0)
    arg = -diff * sign
    viol = arg > 0.0
    values = np.where(viol, arg, 0.0).sum(axis=1)
    # term = -s * (p_j - p_{j+1}) on violating pairs: d/dp_j = -s, d/dp_{j+1} = +s;
    # an index in two violating pairs accumulates both contributions.
    contrib = np.where(viol, sign, 0.0)
    grad_p = np.zeros_like(p)
    grad_p[:, :-1] -= contrib
    grad_p[:, 1:] += contrib
    return values, softmax_vjp(p, grad_p), {}


def _concentrated(Z, y, cfg):
    p = softmax(Z)
    yhat, dev, v = _moments(p)
    vc = np.maximum(v, cfg.variance_floor)
    err = yhat - y.astype(np.float64)
    eps = err**2
    values = 0.5 * np.log(vc) + eps / (2.0 * vc)
    dloss_dv = 0.5 / vc - eps / (2.0 * vc * vc)
    dloss_deps = 0.5 / vc
    # below (or exactly at) the floor the clamp output is constant in v
    active = (v > cfg.variance_floor).astype(np.float64)
    grad_v = p * (dev**2 - v[:, None])
    grad_yhat = p * dev
    grad = (dloss_dv * active)[:, None] * grad_v + (dloss_deps * 2.0 * err)[:, None] * grad_yhat
    aux = {"yhat": yhat, "v": vc, "eps": eps, "dloss_dv": dloss_dv, "dloss_deps": dloss_deps}
    return values, grad, aux


def _softmax_ce(Z, y, cfg):
    logp = log_softmax(Z)
    rows = np.arange(Z.shape[0])
    values = -logp[rows, y - 1]
    grad = np.exp(logp)
    grad[rows, y - 1] -= 1.0
    return values, grad, {}


def _mean(Z, y, cfg):
    p = softmax(Z)
    yhat, dev, _ = _moments(p)
    err = yhat - y.astype(np.float64)
    values = 0.5 * err**2
    # sum_j p_j (j - yhat) = 0 kills the cross terms, so this is exact
    grad = err[:, None] * (p * dev)
    aux = {"yhat": yhat, "eps": err**2, "dloss_deps": np.full(Z.shape[0], 0.5)}
    return values, grad, aux


def _variance(Z, y, cfg):
    p = softmax(Z)
    yhat, dev, v = _moments(p)
    grad = p * (dev**2 - v[:, None])
    aux = {"yhat": yhat, "v": v, "dloss_dv": np.ones(Z.shape[0])}
    return v.copy(), grad, aux


@lru_cache(maxsize=32)
def _target_table(n_classes: int, sigma: float) -> np.ndarray:
    """Rows of gaussian_target for every label 1..C, cached per (C, sigma)."""
    return np.stack([gaussian_target(label, sigma, n_classes) for label in range(1, n_classes + 1)])


def _kl(Z, y, cfg):
    logp = log_softmax(Z)
    d = _target_table(Z.shape[-1], cfg.sigma)[y - 1]
    positive = d > 0.0
    logd = np.log(np.where(positive, d, 1.0))
    values = np.where(positive, d * (logd - logp), 0.0).sum(axis=1)
    grad = np.exp(logp) - d
    return values, grad, {}


def _dldl_v2(Z, y, cfg):
    values, grad, _ = _kl(Z, y, cfg)
    p = softmax(Z)
    yhat, dev, _ = _moments(p)
    err = yhat - y.astype(np.float64)
    values = values + np.abs(err)
    # np.sign(0) == 0 gives the 0 subgradient at yhat == y
    grad = grad + np.sign(err)[:, None] * (p * dev)
    return values, grad, {"yhat": yhat}


_ATOMS = {
    "softmax": _softmax_ce,
    "unimodal": _unimodal,
    "concentrated": _concentrated,
    "mean": _mean,
    "variance": _variance,
    "kl": _kl,
    "dldl_v2": _dldl_v2,
}

# weight a part carries when it appears inside a '+' composition; strings
# name LossConfig fields, numbers are literal
_COMBO_WEIGHTS = {
    "softmax": 1.0,
    "unimodal": "lam",
    "concentrated": 1.0,
    "mean": "lambda1",
    "variance": "lambda2",
    "kl": 1.0,
    "dldl_v2": 1.0,
}

_SINGLE = {name: ((name, 1.0),) for name in _ATOMS}
_SINGLE["unimodal_concentrated"] = (("concentrated", 1.0), ("unimodal", "lam"))
_SINGLE["mean_variance"] = (("softmax", 1.0), ("mean", "lambda1"), ("variance", "lambda2"))


def resolve(name: str) -> tuple[tuple[str, float | str], ...]:
    """Expand a loss identifier or '+"-composition into weighted atoms."""
    name = name.strip()
    if "+" not in name:
        try:
            return _SINGLE[name]
        except KeyError:
            raise ValueError(f"unknown loss {name!r}; known: {', '.join(LOSS_NAMES)}") from None
    parts: list[tuple[str, float | str]] = []
    for raw in name.split("+"):
        part = raw.strip()
        if part == "mean_variance":
            parts += [("mean", "lambda1"), ("variance", "lambda2")]
        elif part == "unimodal_concentrated":
            parts += [("concentrated", 1.0), ("unimodal", "lam")]
        elif part in _ATOMS:
            parts.append((part, _COMBO_WEIGHTS[part]))
        else:
            raise ValueError(f"unknown loss component {part!r} in {name!r}")
    return tuple(parts)


def _weight(spec: float | str, cfg: LossConfig) -> float:
    return spec if isinstance(spec, float) else float(getattr(cfg, spec))


def evaluate_batch(name: str, Z, y, cfg: LossConfig | None = None) -> BatchLossEval:
    """Evaluate a loss on a batch of logit rows Z (B, C) and labels y (B,).

    Does not raise on non-finite logits; garbage flows through as non-finite
    values so the training loop can flag divergence instead of crashing.
    """
    cfg = cfg or LossConfig()
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[-1] < 2:
        raise ValueError(f"logits must be (B, C) with C >= 2, got shape {Z.shape}")
    if y.shape != (Z.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch {Z.shape[0]}")
    values = np.zeros(Z.shape[0])
    grad = np.zeros_like(Z)
    aux: dict[str, np.ndarray] = {}
    for atom, wspec in resolve(name):
        w = _weight(wspec, cfg)
        part_values, part_grad, part_aux = _ATOMS[atom](Z, y, cfg)
        values += w * part_values
        grad += w * part_grad
        for key, arr in part_aux.items():
            if key in _PARTIAL_AUX:
                aux[key] = aux.get(key, 0.0) + w * arr
            else:
                aux[key] = arr
    return BatchLossEval(values, grad, aux)


def evaluate(name: str, z, y: int, cfg: LossConfig | None = None) -> LossEval:
    """Per-sample evaluation: the primitive behind every batch variant."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise ValueError(f"logits must be a 1-D vector with C >= 2, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    C = z.shape[0]
    if not 1 <= y <= C:
        raise ValueError(f"label {y} outside 1..{C}")
    batch = evaluate_batch(name, z[None, :], np.array([y]), cfg)
    aux = {key: float(arr[0]) for key, arr in batch.aux.items()}
    return LossEval(float(batch.values[0]), batch.grad_z[0], aux)


def unimodal_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("unimodal", z, y, cfg)


def concentrated_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("concentrated", z, y, cfg)


def unimodal_concentrated_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("unimodal_concentrated", z, y, cfg)


def softmax_ce_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("softmax", z, y, cfg)


def mean_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("mean", z, y, cfg)


def variance_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("variance", z, y, cfg)


def mean_variance_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("mean_variance", z, y, cfg)


def kl_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("kl", z, y, cfg)


def dldl_v2_loss(z, y: int, cfg: LossConfig | None = None) -> LossEval:
    return evaluate("dldl_v2", z, y, cfg)


def unimodal_diag_grad(z, y: int) -> np.ndarray:
    """Diagonal-Jacobian approximation of the unimodal gradient (diagnostic).

    Propagates the hinge gradient through d p_j / d z_j = p_j (1 - p_j) only,
    dropping the off-diagonal softmax terms. Kept for comparison against the
    exact gradient; it does not pass finite-difference checks in general and
    is never used for optimization.
    """
    z = np.asarray(z, dtype=np.float64)
    p = softmax(z)
    C = p.shape[0]
    diff = p[:-1] - p[1:]
    pair = np.arange(1, C, dtype=np.float64)
    sign = np.where(pair < y, -1.0, 1.0)
    viol = (-diff * sign) > 0.0
    contrib = np.where(viol, sign, 0.0)
    grad_p = np.zeros_like(p)
    grad_p[:-1] -= contrib
    grad_p[1:] += contrib
    return grad_p * p * (1.0 - p)
