"""Evaluation metrics and distribution diagnostics.

MAE on the expectation, the fraction of predictions unimodal about their
label, the per-label mean predicted standard deviation, and the Spearman
rank correlation between predicted std and the injected ambiguity level.
Spearman (with average-rank ties) is used rather than Pearson because the
adaptivity claim is ordinal: harder instances should get wider
distributions through whatever monotone link the model learned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import is_unimodal, variance

MIN_LABEL_COUNT = 10  # labels with fewer samples are dropped from the std profile


def mae(predictions, labels) -> float:
    """Mean absolute error between predicted expectations and true labels."""
    pred = np.asarray(predictions, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    if pred.shape != lab.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {lab.shape}")
    if pred.size == 0:
        raise ValueError("mae of empty input")
    return float(np.abs(pred - lab).mean())


def unimodality_rate(dists, labels) -> float:
    """Fraction of samples whose distribution is unimodal about the label."""
    dists = np.asarray(dists, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if dists.shape[0] != labels.shape[0]:
        raise ValueError(f"length mismatch: {dists.shape[0]} vs {labels.shape[0]}")
    hits = sum(is_unimodal(dists[i], int(labels[i])) for i in range(dists.shape[0]))
    return hits / dists.shape[0]


def per_label_std_profile(dists, labels, min_count: int = MIN_LABEL_COUNT) -> dict[int, float]:
    """Mean predicted std per label; labels with < min_count samples omitted."""
    dists = np.asarray(dists, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if dists.shape[0] == 0:
        raise ValueError("empty input")
    stds = np.sqrt(variance(dists))
    profile: dict[int, float] = {}
    for label in np.unique(labels):
        mask = labels == label
        if int(mask.sum()) >= min_count:
            profile[int(label)] = float(stds[mask].mean())
    return profile


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0])
    sorted_x = x[order]
    i = 0
    while i < x.shape[0]:
        j = i
        while j + 1 < x.shape[0] and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def ambiguity_spearman(pred_stds, ambiguities) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    x = np.asarray(pred_stds, dtype=np.float64)
    y = np.asarray(ambiguities, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 3:
        raise ValueError(f"need at least 3 pairs, got {x.size}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("degenerate input: one side is all ties")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


@dataclass
class EvalReport:
    mae: float
    unimodality_rate: float
    per_label_std: dict[int, float]
    ambiguity_spearman: float
    n: int

    @property
    def std_spread(self) -> float:
        """max - min of the per-label std profile (0 if fewer than 2 labels)."""
        if len(self.per_label_std) < 2:
            return 0.0
        values = list(self.per_label_std.values())
        return max(values) - min(values)

    def to_csv_row(self) -> str:
        return f"{self.mae!r},{self.unimodality_rate!r},{self.ambiguity_spearman!r},{self.n}"

    @staticmethod
    def csv_header() -> str:
        return "mae,unimodality_rate,ambiguity_spearman,n"


def evaluate_predictions(dists, yhats, labels, ambiguities, min_count: int = MIN_LABEL_COUNT) -> EvalReport:
    """Aggregate the full report; Spearman falls back to nan on degenerate stds."""
    dists = np.asarray(dists, dtype=np.float64)
    stds = np.sqrt(variance(dists))
    try:
        rho = ambiguity_spearman(stds, ambiguities)
    except ValueError:
        rho = float("nan")
    return EvalReport(
        mae=mae(yhats, labels),
        unimodality_rate=unimodality_rate(dists, labels),
        per_label_std=per_label_std_profile(dists, labels, min_count),
        ambiguity_spearman=rho,
        n=int(np.asarray(labels).shape[0]),
    )


def write_per_label_csv(path, profile: dict[int, float], counts: dict[int, int], config_hash: str | None = None) -> None:
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    lines.append("label,mean_std,count")
    for label in sorted(profile):
        lines.append(f"{label},{profile[label]!r},{counts.get(label, 0)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
