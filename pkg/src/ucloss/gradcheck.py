"""Finite-difference oracle for validating the analytic loss gradients.

Central differences with a fixed step on float64 logits, compared against
the analytic gradient with the scale-robust error
||g_a - g_f||_inf / max(1, ||g_f||_inf). Draws that land too close to a
nondifferentiability (an adjacent-probability tie for the hinge, the
variance floor for the concentrated loss, yhat == y for the absolute
expectation term) are skipped and counted, never silently passed:
subgradient points legitimately disagree with finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses
from .dist import softmax

DEFAULT_STEP = 1e-5
DEFAULT_KINK_TOL = 1e-6
PASS_THRESHOLD = 1e-4

CSV_HEADER = "loss,C,samples,skipped_kinks,max_rel_err,mean_rel_err"


class FiniteDiffError(RuntimeError):
    """A probe evaluation came back non-finite; carries the coordinate."""

    def __init__(self, coordinate: int, value: float):
        super().__init__(f"non-finite finite-difference probe at coordinate {coordinate}: {value!r}")
        self.coordinate = coordinate


@dataclass
class GradCheckReport:
    loss_name: str
    C: int
    samples: int
    max_rel_err: float
    mean_rel_err: float
    worst_case: dict | None
    skipped_kinks: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= PASS_THRESHOLD

    def to_csv_row(self) -> str:
        return (
            f"{self.loss_name},{self.C},{self.samples},{self.skipped_kinks},"
            f"{self.max_rel_err!r},{self.mean_rel_err!r}"
        )

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        lines = [
            f"loss={self.loss_name} C={self.C}: {status}",
            f"  samples checked   {self.samples}",
            f"  kinks skipped     {self.skipped_kinks}",
            f"  max rel err       {self.max_rel_err:.3e}",
            f"  mean rel err      {self.mean_rel_err:.3e}",
        ]
        if self.worst_case is not None:
            lines.append(f"  worst case at y={self.worst_case['y']}")
        return "\n".join(lines)


def finite_diff_grad(f: Callable[[np.ndarray], float], z, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central difference (f(z + h e_j) - f(z - h e_j)) / 2h per coordinate."""
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    z = np.asarray(z, dtype=np.float64)
    grad = np.empty_like(z)
    for k in range(z.shape[0]):
        zp = z.copy()
        zp[k] += step
        zm = z.copy()
        zm[k] -= step
        fp = float(f(zp))
        fm = float(f(zm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FiniteDiffError(k, fp if not np.isfinite(fp) else fm)
        grad[k] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = float(np.abs(analytic - numeric).max())
    return diff / max(1.0, float(np.abs(numeric).max()))


def _kink_predicate(loss_name: str, cfg: losses.LossConfig, kink_tol: float):
    """Build the draw filter from the loss's composed parts."""
    atoms = {atom for atom, _ in losses.resolve(loss_name)}
    check_ties = "unimodal" in atoms
    check_floor = "concentrated" in atoms
    check_abs = "dldl_v2" in atoms

    def near_kink(z: np.ndarray, y: int) -> bool:
        p = softmax(z)
        if check_ties and float(np.abs(p[:-1] - p[1:]).min()) <= kink_tol:
            return True
        if check_floor or check_abs:
            idx = np.arange(1, p.shape[0] + 1, dtype=np.float64)
            yhat = float((p * idx).sum())
            if check_abs and abs(yhat - y) <= kink_tol:
                return True
            if check_floor:
                v = float((p * (idx - yhat) ** 2).sum())
                if abs(v - cfg.variance_floor) <= kink_tol:
                    return True
        return False

    return near_kink


def check_function(
    value_and_grad: Callable[[np.ndarray, int], tuple[float, np.ndarray]],
    C: int,
    n_samples: int,
    seed: int,
    step: float = DEFAULT_STEP,
    kink_tol: float = DEFAULT_KINK_TOL,
    near_kink: Callable[[np.ndarray, int], bool] | None = None,
    loss_name: str = "<custom>",
) -> GradCheckReport:
    """Compare an arbitrary (value, grad) function against central differences.

    Draws z ~ 3 * N(0, I) and y uniform in 1..C until `n_samples` kink-free
    draws have been compared; skipped draws are counted. Deterministic given
    the seed.
    """
    if C < 2:
        raise ValueError(f"need C >= 2, got {C}")
    if n_samples < 1:
        raise ValueError(f"need n_samples >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    errors = []
    skipped = 0
    worst_err = -1.0
    worst_case = None
    attempts = 0
    max_attempts = 1000 * n_samples
    while len(errors) < n_samples:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(f"kink filter rejected nearly all draws for {loss_name} (C={C})")
        z = 3.0 * rng.standard_normal(C)
        y = int(rng.integers(1, C + 1))
        if near_kink is not None and near_kink(z, y):
            skipped += 1
            continue
        _, analytic = value_and_grad(z, y)
        numeric = finite_diff_grad(lambda zz: value_and_grad(zz, y)[0], z, step)
        err = relative_error(analytic, numeric)
        errors.append(err)
        if err > worst_err:
            worst_err = err
            worst_case = {"z": z.copy(), "y": y, "rel_err": err}
    arr = np.asarray(errors)
    return GradCheckReport(
        loss_name=loss_name,
        C=C,
        samples=len(errors),
        max_rel_err=float(arr.max()),
        mean_rel_err=float(arr.mean()),
        worst_case=worst_case,
        skipped_kinks=skipped,
    )


def check_loss(
    loss_name: str,
    C: int,
    n_samples: int = 100,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    kink_tol: float = DEFAULT_KINK_TOL,
    cfg: losses.LossConfig | None = None,
) -> GradCheckReport:
    """Gradient-check a registered loss (or '+'-composition) at class count C."""
    cfg = cfg or losses.LossConfig()
    losses.resolve(loss_name)  # fail fast on unknown names

    def value_and_grad(z: np.ndarray, y: int) -> tuple[float, np.ndarray]:
        out = losses.evaluate(loss_name, z, y, cfg)
        return out.value, out.grad_z

    return check_function(
        value_and_grad,
        C,
        n_samples,
        seed,
        step=step,
        kink_tol=kink_tol,
        near_kink=_kink_predicate(loss_name, cfg, kink_tol),
        loss_name=loss_name,
    )
