"""Synthetic ordinal-regression data with per-instance ambiguity.

Each sample gets a label y drawn uniformly from 1..C, smooth base features
computed from t = y/C, and isotropic Gaussian feature noise at one of two
scales ("easy" vs "hard"). The applied noise scale is stored per sample as
metadata for the evaluator; the model never sees it. The feature map is
monotone-informative in y so a small MLP can learn it, and the two-level
ambiguity gives adaptivity tests a clean contrast.

Randomness comes from numpy's default PCG64 generator seeded with the spec
seed, with a fixed draw order (labels, then the high/low noise coin flips,
then the noise matrix), so datasets are bit-reproducible.

File format: CSV with header ``id,label,ambiguity,f0,f1,...``; ids are the
0-based row numbers, labels are 1-based, and floats are written with 17
significant digits so write/read round-trips are bit-stable. Lines starting
with '#' are metadata comments (config hash, class count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int
    n_samples: int
    feature_dim: int = 8
    noise_low: float = 0.02
    noise_high: float = 0.25
    high_noise_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.feature_dim < 2:
            raise ValueError(f"feature_dim must be >= 2, got {self.feature_dim}")
        if self.noise_low < 0:
            raise ValueError(f"noise_low must be >= 0, got {self.noise_low}")
        if self.noise_high < self.noise_low:
            raise ValueError(
                f"noise_high ({self.noise_high}) must be >= noise_low ({self.noise_low})"
            )
        if not 0.0 <= self.high_noise_fraction <= 1.0:
            raise ValueError(f"high_noise_fraction must be in [0, 1], got {self.high_noise_fraction}")


@dataclass(frozen=True)
class SyntheticSample:
    features: np.ndarray
    label: int
    ambiguity: float


@dataclass
class Dataset:
    """Column-wise storage; index to get a SyntheticSample view."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64, values in 1..C
    ambiguity: np.ndarray  # (n,) float64
    n_classes: int

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __getitem__(self, i: int) -> SyntheticSample:
        return SyntheticSample(self.features[i], int(self.labels[i]), float(self.ambiguity[i]))

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.ambiguity[idx], self.n_classes)


def base_features(labels, n_classes: int, feature_dim: int) -> np.ndarray:
    """Noise-free feature map: [t, t^2, sin(pi t), cos(pi t), t^3] cycled.

    t = y / C, so features vary smoothly and injectively with the label.
    """
    t = np.asarray(labels, dtype=np.float64) / float(n_classes)
    pattern = [t, t**2, np.sin(np.pi * t), np.cos(np.pi * t), t**3]
    cols = [pattern[k % len(pattern)] for k in range(feature_dim)]
    return np.stack(cols, axis=1)


def generate(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    labels = rng.integers(1, spec.n_classes + 1, size=spec.n_samples)
    coin = rng.random(spec.n_samples)
    ambiguity = np.where(coin < spec.high_noise_fraction, spec.noise_high, spec.noise_low)
    noise = rng.standard_normal((spec.n_samples, spec.feature_dim))
    features = base_features(labels, spec.n_classes, spec.feature_dim) + ambiguity[:, None] * noise
    return Dataset(features, labels.astype(np.int64), ambiguity, spec.n_classes)


def write_csv(path, ds: Dataset, config_hash: str | None = None) -> None:
    d = ds.features.shape[1]
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    lines.append(f"# classes={ds.n_classes}")
    lines.append("id,label,ambiguity," + ",".join(f"f{k}" for k in range(d)))
    for i in range(len(ds)):
        feats = ",".join(format(x, ".17g") for x in ds.features[i])
        lines.append(f"{i},{ds.labels[i]},{format(ds.ambiguity[i], '.17g')},{feats}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> Dataset:
    n_classes = None
    rows = []
    with open(path) as fh:
        header = None
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# classes="):
                    n_classes = int(line.split("=", 1)[1])
                continue
            if header is None:
                header = line.split(",")
                if header[:3] != ["id", "label", "ambiguity"]:
                    raise ValueError(f"unexpected dataset header in {path}: {header[:3]}")
                continue
            rows.append(line.split(","))
    if not rows:
        raise ValueError(f"dataset file {path} has no data rows")
    labels = np.array([int(r[1]) for r in rows], dtype=np.int64)
    ambiguity = np.array([float(r[2]) for r in rows])
    features = np.array([[float(x) for x in r[3:]] for r in rows])
    if n_classes is None:
        # older files without the comment: fall back to the largest label seen
        n_classes = int(labels.max())
    if labels.min() < 1 or labels.max() > n_classes:
        raise ValueError(f"labels outside 1..{n_classes} in {path}")
    return Dataset(features, labels, ambiguity, n_classes)
