"""Minimal feedforward network and deterministic training loop.

A plain numpy MLP maps feature vectors to C logits; any registered loss
drives minibatch SGD-with-momentum or Adam with a stepwise learning-rate
decay. Everything random (init, shuffling, batch order, the trace
subsample) comes from one generator seeded by the config, so a (dataset,
config, seed) triple fully determines the run.

Divergence is data, not failure: a non-finite loss, gradient, or parameter
update halts training, rolls the parameters back to the last finite state,
and marks the trace `diverged` so sweep experiments can record it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .dist import softmax, class_values
from .synth import Dataset

CHECKPOINT_VERSION = 1

_ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0.0).astype(np.float64)),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


@dataclass
class TrainConfig:
    loss: str = "unimodal_concentrated"
    loss_cfg: losses.LossConfig = field(default_factory=losses.LossConfig)
    hidden_sizes: tuple[int, ...] = (64, 64)
    optimizer: str = "adam"  # "sgd_momentum" | "adam"
    lr: float = 0.01
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 1000
    batch_size: int = 128
    max_steps: int = 2000
    seed: int = 0
    grad_clip: float | None = None
    momentum: float = 0.9
    activation: str = "relu"
    trace_every: int = 50

    def __post_init__(self):
        losses.resolve(self.loss)
        if self.optimizer not in ("sgd_momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if self.lr_decay_every < 1 or self.batch_size < 1 or self.max_steps < 1:
            raise ValueError("lr_decay_every, batch_size and max_steps must be >= 1")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError(f"grad_clip must be > 0 or None, got {self.grad_clip}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    @property
    def feature_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.weights + self.biases)


@dataclass
class TraceRow:
    step: int
    loss: float
    mae: float
    status: str


@dataclass
class TrainingTrace:
    rows: list[TraceRow]
    status: str  # "ok" | "diverged"
    steps_run: int


def init_params(feature_dim: int, hidden_sizes, n_classes: int, activation: str, rng) -> ModelParams:
    """Glorot-uniform init: each layer uniform in +-sqrt(6/(fan_in+fan_out))."""
    sizes = [feature_dim, *hidden_sizes, n_classes]
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return ModelParams(weights, biases, activation)


def forward(params: ModelParams, features) -> np.ndarray:
    """Logits for a feature matrix (B, d) or a single vector (d,)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.feature_dim:
        raise ValueError(f"feature dim {x.shape[1]} does not match model {params.feature_dim}")
    act, _ = _ACTIVATIONS[params.activation]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = act(h @ w + b)
    z = h @ params.weights[-1] + params.biases[-1]
    return z[0] if single else z


def _forward_cached(params: ModelParams, x: np.ndarray):
    act, _ = _ACTIVATIONS[params.activation]
    pre = []
    hidden = [x]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = h @ w + b
        pre.append(a)
        h = act(a)
        hidden.append(h)
    z = h @ params.weights[-1] + params.biases[-1]
    return z, pre, hidden


def backward(params: ModelParams, features, labels, loss_name: str, cfg: losses.LossConfig | None = None):
    """Batch-mean loss and its exact gradients w.r.t. every parameter.

    Returns (value, grad_weights, grad_biases). A non-finite value or
    gradient is returned as-is for the caller to flag; nothing raises.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != params.feature_dim:
        raise ValueError(f"features must be (B, {params.feature_dim}), got {x.shape}")
    z, pre, hidden = _forward_cached(params, x)
    batch = losses.evaluate_batch(loss_name, z, y, cfg)
    n = x.shape[0]
    delta = batch.grad_z / n  # d(mean loss)/dz
    _, dact = _ACTIVATIONS[params.activation]
    grad_w = [np.empty(0)] * len(params.weights)
    grad_b = [np.empty(0)] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        grad_w[layer] = hidden[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * dact(pre[layer - 1])
    return batch.mean_value, grad_w, grad_b


def predict(params: ModelParams, features):
    """Distribution, its expectation, and its variance per sample."""
    z = forward(params, features)
    p = softmax(z)
    idx = class_values(params.n_classes)
    yhat = (p * idx).sum(axis=-1)
    dev = idx - (yhat[..., None] if p.ndim > 1 else yhat)
    v = (p * dev**2).sum(axis=-1)
    return p, yhat, v


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params: ModelParams):
        self.cfg = cfg
        self.t = 0
        shapes = params.weights + params.biases
        self.m = [np.zeros_like(a) for a in shapes]
        self.v = [np.zeros_like(a) for a in shapes]

    def step(self, params: ModelParams, grad_w, grad_b, lr: float) -> None:
        self.t += 1
        grads = grad_w + grad_b
        tensors = params.weights + params.biases
        if self.cfg.optimizer == "sgd_momentum":
            mu = self.cfg.momentum
            for slot, (theta, g) in enumerate(zip(tensors, grads)):
                self.m[slot] = mu * self.m[slot] + g
                theta -= lr * self.m[slot]
        else:  # adam, standard constants
            b1, b2, eps = 0.9, 0.999, 1e-8
            for slot, (theta, g) in enumerate(zip(tensors, grads)):
                self.m[slot] = b1 * self.m[slot] + (1 - b1) * g
                self.v[slot] = b2 * self.v[slot] + (1 - b2) * g * g
                mhat = self.m[slot] / (1 - b1**self.t)
                vhat = self.v[slot] / (1 - b2**self.t)
                theta -= lr * mhat / (np.sqrt(vhat) + eps)


def _clip_global(grad_w, grad_b, clip: float):
    total = 0.0
    for g in grad_w + grad_b:
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > clip:
        scale = clip / norm
        grad_w = [g * scale for g in grad_w]
        grad_b = [g * scale for g in grad_b]
    return grad_w, grad_b


def _all_finite(value, grad_w, grad_b) -> bool:
    if not np.isfinite(value):
        return False
    return all(np.all(np.isfinite(g)) for g in grad_w + grad_b)


def train(dataset: Dataset, cfg: TrainConfig) -> tuple[ModelParams, TrainingTrace]:
    """Run max_steps minibatch updates; deterministic given (dataset, cfg)."""
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(dataset.features.shape[1], cfg.hidden_sizes, dataset.n_classes, cfg.activation, rng)
    probe = rng.choice(n, size=min(512, n), replace=False)  # fixed trace subsample
    optimizer = _Optimizer(cfg, params)
    rows: list[TraceRow] = []
    status = "ok"
    order = rng.permutation(n)
    cursor = 0
    step = 0

    def probe_mae() -> float:
        _, yhat, _ = predict(params, dataset.features[probe])
        return float(np.abs(yhat - dataset.labels[probe]).mean())

    for step in range(1, cfg.max_steps + 1):
        if cursor + cfg.batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        batch_idx = order[cursor : cursor + cfg.batch_size]
        cursor += cfg.batch_size
        value, grad_w, grad_b = backward(
            params, dataset.features[batch_idx], dataset.labels[batch_idx], cfg.loss, cfg.loss_cfg
        )
        if not _all_finite(value, grad_w, grad_b):
            rows.append(TraceRow(step, float(value), float("nan"), "diverged"))
            status = "diverged"
            break
        if cfg.grad_clip is not None:
            grad_w, grad_b = _clip_global(grad_w, grad_b, cfg.grad_clip)
        lr = cfg.lr * cfg.lr_decay_factor ** ((step - 1) // cfg.lr_decay_every)
        rollback = params.copy()
        optimizer.step(params, grad_w, grad_b, lr)
        if not params.all_finite():
            params = rollback
            rows.append(TraceRow(step, float(value), float("nan"), "diverged"))
            status = "diverged"
            break
        if step % cfg.trace_every == 0 or step == cfg.max_steps:
            rows.append(TraceRow(step, float(value), probe_mae(), "ok"))
    return params, TrainingTrace(rows, status, step)


def write_trace_csv(path, trace: TrainingTrace, config_hash: str | None = None) -> None:
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    lines.append("step,loss,mae,status")
    for row in trace.rows:
        lines.append(f"{row.step},{row.loss!r},{row.mae!r},{row.status}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def save_checkpoint(path, params: ModelParams, extra_meta: dict | None = None) -> None:
    """Parameter tensors plus a JSON header in one uncompressed .npz."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "activation": params.activation,
        "layer_sizes": [int(w.shape[0]) for w in params.weights] + [int(params.weights[-1].shape[1])],
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        n_layers = len(meta["layer_sizes"]) - 1
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
    return ModelParams(weights, biases, meta["activation"]), meta
