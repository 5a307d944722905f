"""Experiment configuration files: flat INI sections, strictly validated.

Sections mirror the config objects: [dataset] (a synthetic spec or a file
path), [loss], [train], [experiment]. Unknown sections or keys are errors;
reproducibility demands configs fail loudly rather than silently ignore a
typo. Every output file produced from a config embeds its hash, computed
over the canonical parsed key/value pairs so formatting and comments do not
matter.

Example::

    [dataset]
    classes = 20
    samples = 5000
    seed = 101

    [loss]
    name = unimodal_concentrated
    lambda = 1000

    [train]
    optimizer = sgd_momentum
    max_steps = 2000
    seed = 7

    [experiment]
    output_dir = out/ucl
    repeats = 5
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

from .losses import LossConfig, resolve
from .synth import SyntheticSpec
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


_DATASET_KEYS = {
    "path",
    "classes",
    "samples",
    "feature_dim",
    "noise_low",
    "noise_high",
    "high_noise_fraction",
    "seed",
}
_LOSS_KEYS = {"name", "lambda", "lambda1", "lambda2", "sigma", "variance_floor"}
_TRAIN_KEYS = {
    "hidden_sizes",
    "optimizer",
    "lr",
    "lr_decay_factor",
    "lr_decay_every",
    "batch_size",
    "max_steps",
    "seed",
    "grad_clip",
    "momentum",
    "activation",
    "trace_every",
}
_EXPERIMENT_KEYS = {
    "eval_split_fraction",
    "output_dir",
    "repeats",
    "combinations",
    "lambdas",
    "degraded_mae_threshold",
}


@dataclass
class ExperimentConfig:
    dataset_path: str | None
    dataset_spec: SyntheticSpec | None
    train: TrainConfig
    eval_split_fraction: float = 0.2
    output_dir: str = "out"
    repeats: int = 1
    combinations: tuple[str, ...] = (
        "softmax+concentrated",
        "unimodal+concentrated",
        "softmax+mean_variance",
        "unimodal+mean_variance",
        "unimodal",
        "concentrated",
        "kl",
        "dldl_v2",
    )
    lambdas: tuple[float, ...] = (1e-1, 1e1, 1e2, 1e3, 2e3, 1e4)
    # eval MAE above this marks a completed run "degraded"; None -> 0.15 * (C - 1)
    degraded_mae_threshold: float | None = None
    config_hash: str = ""

    def __post_init__(self):
        if (self.dataset_path is None) == (self.dataset_spec is None):
            raise ConfigError("[dataset] needs either path= or a synthetic spec, not both")
        if not 0.0 < self.eval_split_fraction < 1.0:
            raise ConfigError(f"eval_split_fraction must be in (0, 1), got {self.eval_split_fraction}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        for name in self.combinations:
            resolve(name)
        if not self.lambdas:
            raise ConfigError("lambdas must be nonempty")


def _parse(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parser


def _check_keys(parser, section: str, allowed: set[str]) -> None:
    if not parser.has_section(section):
        return
    unknown = set(parser.options(section)) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")


def _get(parser, section, key, cast, default):
    if not parser.has_section(section) or not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from None


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def config_hash_of(parser: configparser.ConfigParser) -> str:
    canonical = []
    for section in sorted(parser.sections()):
        for key in sorted(parser.options(section)):
            canonical.append(f"{section}.{key}={parser.get(section, key)}")
    digest = hashlib.sha256("\n".join(canonical).encode()).hexdigest()
    return digest[:16]


def canonical_text(parser: configparser.ConfigParser) -> str:
    """Normalized config echo written next to every experiment's outputs."""
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser.options(section)):
            lines.append(f"{key} = {parser.get(section, key)}")
        lines.append("")
    return "\n".join(lines)


def load_dataset_section(parser: configparser.ConfigParser) -> tuple[str | None, SyntheticSpec | None]:
    if not parser.has_section("dataset"):
        raise ConfigError("missing [dataset] section")
    _check_keys(parser, "dataset", _DATASET_KEYS)
    path = _get(parser, "dataset", "path", str, None)
    if path is not None:
        extra = set(parser.options("dataset")) - {"path", "classes"}
        if extra:
            raise ConfigError(f"[dataset] with path= does not take: {', '.join(sorted(extra))}")
        return path, None
    if not parser.has_option("dataset", "classes") or not parser.has_option("dataset", "samples"):
        raise ConfigError("[dataset] synthetic spec needs classes= and samples=")
    try:
        spec = SyntheticSpec(
            n_classes=_get(parser, "dataset", "classes", int, None),
            n_samples=_get(parser, "dataset", "samples", int, None),
            feature_dim=_get(parser, "dataset", "feature_dim", int, 8),
            noise_low=_get(parser, "dataset", "noise_low", float, 0.02),
            noise_high=_get(parser, "dataset", "noise_high", float, 0.25),
            high_noise_fraction=_get(parser, "dataset", "high_noise_fraction", float, 0.3),
            seed=_get(parser, "dataset", "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return None, spec


def load_loss_config(parser: configparser.ConfigParser) -> tuple[str, LossConfig]:
    _check_keys(parser, "loss", _LOSS_KEYS)
    name = _get(parser, "loss", "name", str, "unimodal_concentrated")
    try:
        resolve(name)
        cfg = LossConfig(
            lam=_get(parser, "loss", "lambda", float, 1000.0),
            lambda1=_get(parser, "loss", "lambda1", float, 0.2),
            lambda2=_get(parser, "loss", "lambda2", float, 0.05),
            sigma=_get(parser, "loss", "sigma", float, 1.0),
            variance_floor=_get(parser, "loss", "variance_floor", float, 1e-4),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return name, cfg


def load_train_config(parser: configparser.ConfigParser) -> TrainConfig:
    _check_keys(parser, "train", _TRAIN_KEYS)
    name, loss_cfg = load_loss_config(parser)
    grad_clip_raw = _get(parser, "train", "grad_clip", str, None)
    grad_clip = None if grad_clip_raw in (None, "", "none") else float(grad_clip_raw)
    try:
        return TrainConfig(
            loss=name,
            loss_cfg=loss_cfg,
            hidden_sizes=_get(parser, "train", "hidden_sizes", _int_list, (64, 64)),
            optimizer=_get(parser, "train", "optimizer", str, "adam"),
            lr=_get(parser, "train", "lr", float, 0.01),
            lr_decay_factor=_get(parser, "train", "lr_decay_factor", float, 0.5),
            lr_decay_every=_get(parser, "train", "lr_decay_every", int, 1000),
            batch_size=_get(parser, "train", "batch_size", int, 128),
            max_steps=_get(parser, "train", "max_steps", int, 2000),
            seed=_get(parser, "train", "seed", int, 0),
            grad_clip=grad_clip,
            momentum=_get(parser, "train", "momentum", float, 0.9),
            activation=_get(parser, "train", "activation", str, "relu"),
            trace_every=_get(parser, "train", "trace_every", int, 50),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_experiment_config(path) -> ExperimentConfig:
    parser = _parse(path)
    known_sections = {"dataset", "loss", "train", "experiment"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    _check_keys(parser, "experiment", _EXPERIMENT_KEYS)
    dataset_path, dataset_spec = load_dataset_section(parser)
    train_cfg = load_train_config(parser)
    threshold = _get(parser, "experiment", "degraded_mae_threshold", float, None)
    kwargs = {}
    combos = _get(parser, "experiment", "combinations", _str_list, None)
    if combos is not None:
        kwargs["combinations"] = combos
    lambdas = _get(parser, "experiment", "lambdas", _float_list, None)
    if lambdas is not None:
        kwargs["lambdas"] = lambdas
    return ExperimentConfig(
        dataset_path=dataset_path,
        dataset_spec=dataset_spec,
        train=train_cfg,
        eval_split_fraction=_get(parser, "experiment", "eval_split_fraction", float, 0.2),
        output_dir=_get(parser, "experiment", "output_dir", str, "out"),
        repeats=_get(parser, "experiment", "repeats", int, 1),
        degraded_mae_threshold=threshold,
        config_hash=config_hash_of(parser),
        **kwargs,
    )


def load_synthetic_spec(path) -> tuple[SyntheticSpec, str]:
    """Parse a [dataset]-only spec file for gen-data; returns (spec, hash)."""
    parser = _parse(path)
    unknown = set(parser.sections()) - {"dataset"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    dataset_path, spec = load_dataset_section(parser)
    if spec is None:
        raise ConfigError("gen-data needs a synthetic [dataset] spec, not a path")
    return spec, config_hash_of(parser)
