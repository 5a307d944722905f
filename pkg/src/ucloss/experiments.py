"""Experiment pipelines behind the CLI: train/eval runs, grids, sweeps.

A run is (split, train, evaluate-on-holdout, write artifacts). Repeats run
the same recipe at seeds seed, seed+1, ...; the split is re-drawn per run
seed so repeats are fully independent. Grid and sweep results are collected
into single CSVs with one row per (combination-or-lambda, seed) in a fixed
order, which together with seeded training makes reruns byte-identical.

A completed run whose holdout MAE exceeds the degraded threshold (default
0.15 * (C - 1)) is reported with status "degraded"; a run that hit
non-finite numbers is "diverged". Diverged runs still report metrics from
the last finite parameters.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from . import metrics, synth, trainer
from .config import ExperimentConfig

_FMT = repr  # shortest round-trip float formatting for CSV cells


@dataclass
class RunResult:
    seed: int
    params: trainer.ModelParams
    trace: trainer.TrainingTrace
    report: metrics.EvalReport
    status: str  # "ok" | "degraded" | "diverged"


def split_dataset(ds: synth.Dataset, eval_fraction: float, seed: int):
    """Deterministic shuffle split; the eval block is the permutation tail."""
    n = len(ds)
    n_eval = max(1, int(round(n * eval_fraction)))
    if n_eval >= n:
        raise ValueError(f"eval split {eval_fraction} leaves no training data for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return ds.subset(order[:-n_eval]), ds.subset(order[-n_eval:])


def degraded_threshold(cfg: ExperimentConfig, n_classes: int) -> float:
    if cfg.degraded_mae_threshold is not None:
        return cfg.degraded_mae_threshold
    return 0.15 * (n_classes - 1)


def load_dataset(cfg: ExperimentConfig) -> synth.Dataset:
    if cfg.dataset_path is not None:
        return synth.read_csv(cfg.dataset_path)
    return synth.generate(cfg.dataset_spec)


def run_single(
    ds: synth.Dataset,
    train_cfg: trainer.TrainConfig,
    eval_fraction: float,
    seed: int,
    mae_threshold: float,
) -> RunResult:
    run_cfg = dataclasses.replace(train_cfg, seed=seed)
    train_ds, eval_ds = split_dataset(ds, eval_fraction, seed)
    params, trace = trainer.train(train_ds, run_cfg)
    dists, yhats, _ = trainer.predict(params, eval_ds.features)
    report = metrics.evaluate_predictions(dists, yhats, eval_ds.labels, eval_ds.ambiguity)
    if trace.status == "diverged":
        status = "diverged"
    elif report.mae > mae_threshold:
        status = "degraded"
    else:
        status = "ok"
    return RunResult(seed, params, trace, report, status)


def _write_lines(path, lines) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_train_command(cfg: ExperimentConfig, config_echo: str) -> tuple[int, list[RunResult]]:
    """Train `repeats` seeds, write per-seed artifacts plus an aggregate CSV.

    Exit status: 0 on success (including degraded), 2 if any run diverged.
    """
    ds = load_dataset(cfg)
    threshold = degraded_threshold(cfg, ds.n_classes)
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "config.ini"), "w", newline="\n") as fh:
        fh.write(config_echo)
    results = []
    for k in range(cfg.repeats):
        seed = cfg.train.seed + k
        result = run_single(ds, cfg.train, cfg.eval_split_fraction, seed, threshold)
        run_dir = os.path.join(cfg.output_dir, f"seed-{seed}")
        os.makedirs(run_dir, exist_ok=True)
        trainer.save_checkpoint(
            os.path.join(run_dir, "checkpoint.npz"),
            result.params,
            {"config_hash": cfg.config_hash, "loss": cfg.train.loss},
        )
        trainer.write_trace_csv(os.path.join(run_dir, "trace.csv"), result.trace, cfg.config_hash)
        report = result.report
        _write_lines(
            os.path.join(run_dir, "eval.csv"),
            [
                f"# config_hash={cfg.config_hash}",
                metrics.EvalReport.csv_header() + ",status",
                report.to_csv_row() + f",{result.status}",
            ],
        )
        counts = _label_counts(ds)
        metrics.write_per_label_csv(
            os.path.join(run_dir, "per_label_std.csv"), report.per_label_std, counts, cfg.config_hash
        )
        results.append(result)
    lines = [f"# config_hash={cfg.config_hash}", "seed,mae,unimodality_rate,ambiguity_spearman,status"]
    for r in results:
        lines.append(
            f"{r.seed},{_FMT(r.report.mae)},{_FMT(r.report.unimodality_rate)},"
            f"{_FMT(r.report.ambiguity_spearman)},{r.status}"
        )
    _write_lines(os.path.join(cfg.output_dir, "aggregate.csv"), lines)
    exit_code = 2 if any(r.status == "diverged" for r in results) else 0
    return exit_code, results


def _label_counts(ds: synth.Dataset) -> dict[int, int]:
    values, counts = np.unique(ds.labels, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def run_compare(cfg: ExperimentConfig) -> list[dict]:
    """Loss-combination grid; divergence is recorded per row, never aborts."""
    ds = load_dataset(cfg)
    threshold = degraded_threshold(cfg, ds.n_classes)
    rows = []
    for combination in cfg.combinations:
        run_cfg = dataclasses.replace(cfg.train, loss=combination)
        for k in range(cfg.repeats):
            seed = cfg.train.seed + k
            result = run_single(ds, run_cfg, cfg.eval_split_fraction, seed, threshold)
            rows.append(
                {
                    "combination": combination,
                    "seed": seed,
                    "mae": result.report.mae,
                    "unimodality_rate": result.report.unimodality_rate,
                    "ambiguity_spearman": result.report.ambiguity_spearman,
                    "status": result.status,
                    "report": result.report,
                }
            )
    return rows


def write_compare_csv(path, rows, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", "combination,seed,mae,unimodality_rate,ambiguity_spearman,status"]
    for r in rows:
        lines.append(
            f"{r['combination']},{r['seed']},{_FMT(r['mae'])},{_FMT(r['unimodality_rate'])},"
            f"{_FMT(r['ambiguity_spearman'])},{r['status']}"
        )
    _write_lines(path, lines)


def run_sweep_lambda(cfg: ExperimentConfig) -> list[dict]:
    """Train unimodal_concentrated at each lambda in the grid."""
    ds = load_dataset(cfg)
    threshold = degraded_threshold(cfg, ds.n_classes)
    rows = []
    for lam in cfg.lambdas:
        loss_cfg = dataclasses.replace(cfg.train.loss_cfg, lam=lam)
        run_cfg = dataclasses.replace(cfg.train, loss="unimodal_concentrated", loss_cfg=loss_cfg)
        for k in range(cfg.repeats):
            seed = cfg.train.seed + k
            result = run_single(ds, run_cfg, cfg.eval_split_fraction, seed, threshold)
            rows.append({"lambda": lam, "seed": seed, "mae": result.report.mae, "status": result.status})
    return rows


def write_sweep_csv(path, rows, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", "lambda,seed,mae,status"]
    for r in rows:
        lines.append(f"{_FMT(r['lambda'])},{r['seed']},{_FMT(r['mae'])},{r['status']}")
    _write_lines(path, lines)
