"""Command-line entry point.

Subcommands: gen-data, train, compare, sweep-lambda, gradcheck, inspect.
Exit codes: 0 success, 1 validation error, 2 divergence observed (train);
grid/sweep commands report divergence per row and exit 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import experiments, gradcheck, losses, metrics, synth, trainer
from .config import (
    ConfigError,
    canonical_text,
    load_experiment_config,
    load_synthetic_spec,
)


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def cmd_gen_data(args) -> int:
    spec, config_hash = load_synthetic_spec(args.config)
    ds = synth.generate(spec)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    synth.write_csv(args.out, ds, config_hash)
    high = int((ds.ambiguity == spec.noise_high).sum()) if spec.noise_high > spec.noise_low else 0
    print(f"wrote {args.out}: n={len(ds)} C={ds.n_classes} high-ambiguity={high}/{len(ds)}")
    return 0


def _apply_overrides(cfg, args):
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if getattr(args, "repeats", None):
        cfg = dataclasses.replace(cfg, repeats=args.repeats)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=args.seed))
    if getattr(args, "lambdas", None):
        cfg = dataclasses.replace(cfg, lambdas=args.lambdas)
    return cfg


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    echo = canonical_text(_reparse(args.config))
    cfg = _apply_overrides(cfg, args)
    code, results = experiments.run_train_command(cfg, echo)
    for r in results:
        print(f"seed={r.seed} mae={r.report.mae:.4f} unimodality={r.report.unimodality_rate:.4f} status={r.status}")
    print(f"artifacts under {cfg.output_dir}")
    return code


def _reparse(path):
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read(path)
    return parser


def cmd_compare(args) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    rows = experiments.run_compare(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "compare.csv")
    experiments.write_compare_csv(out, rows, cfg.config_hash)
    for r in rows:
        print(f"{r['combination']:28s} seed={r['seed']} mae={r['mae']:.4f} status={r['status']}")
    print(f"wrote {out}")
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    rows = experiments.run_sweep_lambda(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "sweep.csv")
    experiments.write_sweep_csv(out, rows, cfg.config_hash)
    for r in rows:
        print(f"lambda={r['lambda']:g} seed={r['seed']} mae={r['mae']:.4f} status={r['status']}")
    print(f"wrote {out}")
    return 0


def cmd_gradcheck(args) -> int:
    names = losses.LOSS_NAMES if args.losses == ("all",) else args.losses
    for name in names:
        losses.resolve(name)
    lines = [gradcheck.CSV_HEADER]
    failed = False
    for name in names:
        for C in args.classes:
            report = gradcheck.check_loss(name, C, n_samples=args.samples, seed=args.seed)
            lines.append(report.to_csv_row())
            marker = "ok" if report.passed else "FAIL"
            print(
                f"{name:24s} C={C:4d} max_rel_err={report.max_rel_err:.3e} "
                f"skipped={report.skipped_kinks} {marker}"
            )
            failed = failed or not report.passed
    if args.out:
        out_dir = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(out_dir, exist_ok=True)
        with open(args.out, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 1 if failed else 0


def cmd_inspect(args) -> int:
    params, meta = trainer.load_checkpoint(args.checkpoint)
    ds = synth.read_csv(args.dataset)
    bad = [i for i in args.ids if not 0 <= i < len(ds)]
    if bad:
        print(f"unknown sample ids {bad}; valid range is 0..{len(ds) - 1}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    config_hash = meta.get("config_hash", "")
    summary = [f"# config_hash={config_hash}", "id,label,ambiguity,yhat,variance,std"]
    for i in args.ids:
        p, yhat, v = trainer.predict(params, ds.features[i])
        lines = [f"# config_hash={config_hash}", "class_index,probability"]
        for j, prob in enumerate(p, start=1):
            lines.append(f"{j},{prob!r}")
        path = os.path.join(args.out, f"sample_{i}.csv")
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        summary.append(
            f"{i},{ds.labels[i]},{ds.ambiguity[i]!r},{float(yhat)!r},{float(v)!r},{float(np.sqrt(v))!r}"
        )
    with open(os.path.join(args.out, "summary.csv"), "w", newline="\n") as fh:
        fh.write("\n".join(summary) + "\n")
    print(f"wrote {len(args.ids)} distribution dumps under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucloss",
        description="Ordinal label-distribution losses: datasets, training, ablation grids, gradient checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV from a [dataset] spec file")
    p.add_argument("--config", required=True, help="spec file with a [dataset] section")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train and evaluate per the config; writes run artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override [experiment] output_dir")
    p.add_argument("--seed", type=int, help="override [train] seed")
    p.add_argument("--repeats", type=int, help="override [experiment] repeats")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("compare", help="run the loss-combination grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("sweep-lambda", help="sweep the unimodal weight of unimodal_concentrated")
    p.add_argument("--config", required=True)
    p.add_argument("--lambdas", type=_float_list, help="comma list, e.g. 0.1,10,100,1000,2000,10000")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.set_defaults(fn=cmd_sweep_lambda)

    p = sub.add_parser("gradcheck", help="finite-difference checks for the analytic gradients")
    p.add_argument("--losses", type=_str_list, default=("all",), help="comma list or 'all'")
    p.add_argument("--classes", type=_int_list, default=(3, 5, 10, 101))
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report CSV here")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("inspect", help="dump predicted distributions for chosen samples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ids", type=_int_list, required=True, help="comma list of 0-based sample ids")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
