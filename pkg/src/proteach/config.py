"""Experiment configuration.

Config files are flat text: one `key = value` pair per line, `#` comments and
blank lines ignored. Every key must be in the schema below; unknown keys are
rejected with the offending line number so typos cannot silently change an
experiment. Command-line flags mirror the keys one-to-one and take precedence
over the file, which takes precedence over the defaults.

Schema (defaults in parentheses):

  method            pt | finetune | mean_teacher | pseudo_label (pt)
  noise_kind        none | symmetric | asymmetric (none)
  noise_rates       comma list of rates in [0,1) (0.0); `train` wants exactly one
  noise_pair        two class indices for asymmetric noise (2,6)
  seeds             comma list of base seeds, nonempty (0,1,2,3,4)
  output_dir        directory for result files (runs)
  dataset_file      optional dataset file; empty means synthesize per seed ()
  classes           number of classes (7)
  feature_dim       feature dimension of synthetic data (8)
  labeled_per_class labeled samples per class (100)
  unlabeled_count   unlabeled pool size (5000)
  test_per_class    test samples per class (50)
  cluster_spread    Gaussian cluster sigma (0.31)
  class_imbalance   optional per-class multipliers, one per class ()
  hidden_dims       hidden layer widths (64,64)
  activation        relu | tanh (relu)
  abandon_rate      auto | rate in [0,1); auto derives from the noise level (auto)
  turning_iteration iterations until the kept ratio bottoms out (300)
  epochs            training epochs (24)
  base_lr           initial learning rate (0.05)
  lr_decay_epoch    epoch at which the rate steps down (16)
  decayed_lr        learning rate after the step (0.005)
  rampup_max        peak unsupervised weight (10.0)
  ema_cap           cap on the teacher averaging coefficient (0.999)
  batch_size        samples per mini-batch (40)
  labeled_fraction  labeled share of each batch; times batch_size must be integral (0.25)
  momentum          SGD momentum (0.9)
  weight_decay      SGD weight decay (0.0001)
  aug_sigma         augmentation noise sigma (0.05)
  aug_flip_pairs    feature pairs swapped with prob 1/2, e.g. 2-3,4-5 (2-3,4-5)
  guidance          cross | same (cross)
  selection_mode    progressive | fixed (progressive)
  confidence_enabled   true | false (false)
  confidence_threshold rescue threshold in [0,1] (0.9)
  confidence_penalty   initial weight of the low-confidence penalty (0.1)
  confidence_budget    target mean confidence in (0,1) (0.8)
  class_keep_probs     optional class:prob pairs, e.g. 2:0.9,4:0.8 ()
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .confidence import ConfidenceConfig
from .data import AugmentationSpec, DatasetSplit, load_dataset, make_synthetic_dataset
from .errors import ConfigurationError
from .net import NetConfig
from .noise import NoiseSpec
from .schedules import ScheduleConfig, preset_abandon_rate
from .trainer import GUIDANCE_MODES, SELECTION_MODES, Seeds, TrainConfig

METHODS = ("pt", "finetune", "mean_teacher", "pseudo_label")
NOISE_KINDS_CFG = ("none", "symmetric", "asymmetric")

REPORTED_MODEL = {
    "pt": "teacher1",
    "mean_teacher": "teacher1",
    "finetune": "student1",
    "pseudo_label": "student1",
}


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_float_list(raw: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(v) for v in raw.split(","))


def _parse_int_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(v) for v in raw.split(","))


def _parse_pairs(raw: str) -> tuple[tuple[int, int], ...]:
    raw = raw.strip()
    if not raw:
        return ()
    pairs = []
    for chunk in raw.split(","):
        a, _, b = chunk.partition("-")
        if not _:
            raise ValueError(f"expected i-j pairs, got {chunk!r}")
        pairs.append((int(a), int(b)))
    return tuple(pairs)


def _parse_keep_probs(raw: str) -> tuple[tuple[int, float], ...]:
    raw = raw.strip()
    if not raw:
        return ()
    items = []
    for chunk in raw.split(","):
        cls, sep, prob = chunk.partition(":")
        if not sep:
            raise ValueError(f"expected class:prob pairs, got {chunk!r}")
        items.append((int(cls), float(prob)))
    return tuple(items)


def _parse_abandon(raw: str) -> float | str:
    raw = raw.strip()
    return "auto" if raw == "auto" else float(raw)


def _parse_optional_str(raw: str) -> str | None:
    raw = raw.strip()
    return raw or None


# key -> (parser, default as written in a config file)
SCHEMA: dict[str, tuple[Callable[[str], object], str]] = {
    "method": (str.strip, "pt"),
    "noise_kind": (str.strip, "none"),
    "noise_rates": (_parse_float_list, "0.0"),
    "noise_pair": (_parse_int_list, "2,6"),
    "seeds": (_parse_int_list, "0,1,2,3,4"),
    "output_dir": (str.strip, "runs"),
    "dataset_file": (_parse_optional_str, ""),
    "classes": (int, "7"),
    "feature_dim": (int, "8"),
    "labeled_per_class": (int, "100"),
    "unlabeled_count": (int, "5000"),
    "test_per_class": (int, "50"),
    "cluster_spread": (float, "0.31"),
    "class_imbalance": (_parse_float_list, ""),
    "hidden_dims": (_parse_int_list, "64,64"),
    "activation": (str.strip, "relu"),
    "abandon_rate": (_parse_abandon, "auto"),
    "turning_iteration": (int, "300"),
    "epochs": (int, "24"),
    "base_lr": (float, "0.05"),
    "lr_decay_epoch": (int, "16"),
    "decayed_lr": (float, "0.005"),
    "rampup_max": (float, "10.0"),
    "ema_cap": (float, "0.999"),
    "batch_size": (int, "40"),
    "labeled_fraction": (float, "0.25"),
    "momentum": (float, "0.9"),
    "weight_decay": (float, "0.0001"),
    "aug_sigma": (float, "0.05"),
    "aug_flip_pairs": (_parse_pairs, "2-3,4-5"),
    "guidance": (str.strip, "cross"),
    "selection_mode": (str.strip, "progressive"),
    "confidence_enabled": (_parse_bool, "false"),
    "confidence_threshold": (float, "0.9"),
    "confidence_penalty": (float, "0.1"),
    "confidence_budget": (float, "0.8"),
    "class_keep_probs": (_parse_keep_probs, ""),
}


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    noise_kind: str
    noise_rates: tuple[float, ...]
    noise_pair: tuple[int, ...]
    seeds: tuple[int, ...]
    output_dir: str
    dataset_file: str | None
    classes: int
    feature_dim: int
    labeled_per_class: int
    unlabeled_count: int
    test_per_class: int
    cluster_spread: float
    class_imbalance: tuple[float, ...]
    hidden_dims: tuple[int, ...]
    activation: str
    abandon_rate: float | str
    turning_iteration: int
    epochs: int
    base_lr: float
    lr_decay_epoch: int
    decayed_lr: float
    rampup_max: float
    ema_cap: float
    batch_size: int
    labeled_fraction: float
    momentum: float
    weight_decay: float
    aug_sigma: float
    aug_flip_pairs: tuple[tuple[int, int], ...]
    guidance: str
    selection_mode: str
    confidence_enabled: bool
    confidence_threshold: float
    confidence_penalty: float
    confidence_budget: float
    class_keep_probs: tuple[tuple[int, float], ...]


def parse_value(key: str, raw: str, where: str = "<flag>") -> object:
    if key not in SCHEMA:
        raise ConfigurationError(f"{where}: unknown key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        return parser(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"{where}: bad value for {key!r}: {exc}") from exc


def default_values() -> dict[str, object]:
    return {key: parser(default) for key, (parser, default) in SCHEMA.items()}


def parse_config_file(path: str | Path) -> dict[str, object]:
    values: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        values[key] = parse_value(key, value.strip(), where=f"{path}:{lineno}")
    return values


def build_experiment_config(overrides: dict[str, object]) -> ExperimentConfig:
    values = default_values()
    for key, val in overrides.items():
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}")
        values[key] = val
    exp = ExperimentConfig(**values)  # type: ignore[arg-type]
    _validate(exp)
    return exp


def _validate(exp: ExperimentConfig) -> None:
    if exp.method not in METHODS:
        raise ConfigurationError(f"method must be one of {METHODS}")
    if exp.noise_kind not in NOISE_KINDS_CFG:
        raise ConfigurationError(f"noise_kind must be one of {NOISE_KINDS_CFG}")
    if not exp.seeds:
        raise ConfigurationError("seed list must be nonempty")
    if not exp.noise_rates:
        raise ConfigurationError("noise_rates must be nonempty")
    for rate in exp.noise_rates:
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError("noise rates must be in [0, 1)")
    if exp.noise_kind == "asymmetric":
        if len(exp.noise_pair) != 2 or exp.noise_pair[0] == exp.noise_pair[1]:
            raise ConfigurationError("asymmetric noise needs two distinct classes")
        if any(not 0 <= c < exp.classes for c in exp.noise_pair):
            raise ConfigurationError("noise_pair classes out of range")
    if exp.class_imbalance and len(exp.class_imbalance) != exp.classes:
        raise ConfigurationError("class_imbalance needs one multiplier per class")
    if isinstance(exp.abandon_rate, float) and not 0.0 <= exp.abandon_rate < 1.0:
        raise ConfigurationError("abandon_rate must be in [0, 1) or 'auto'")
    if exp.guidance not in GUIDANCE_MODES:
        raise ConfigurationError(f"guidance must be one of {GUIDANCE_MODES}")
    if exp.selection_mode not in SELECTION_MODES:
        raise ConfigurationError(f"selection_mode must be one of {SELECTION_MODES}")
    for cls, _prob in exp.class_keep_probs:
        if not 0 <= cls < exp.classes:
            raise ConfigurationError("class_keep_probs class out of range")


def _canonical(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            if all(isinstance(v[1], float) for v in value):
                return ",".join(f"{a}:{_canonical(b)}" for a, b in value)
            return ",".join(f"{a}-{b}" for a, b in value)
        return ",".join(_canonical(v) for v in value)
    if value is None:
        return ""
    return str(value)


def resolved_items(exp: ExperimentConfig) -> dict[str, str]:
    """Canonical key -> string form of the full config, for output headers."""
    return {f.name: _canonical(getattr(exp, f.name)) for f in fields(exp)}


def derive_seeds(seed: int) -> tuple[int, int, int, int]:
    """Per-cell (group1, group2, data, noise) seeds from one base seed."""
    state = np.random.SeedSequence(seed).generate_state(4)
    return tuple(int(v) for v in state)


def resolve_abandon_rate(exp: ExperimentConfig, noise_rate: float) -> float:
    if exp.abandon_rate == "auto":
        return preset_abandon_rate(exp.noise_kind, noise_rate)
    return float(exp.abandon_rate)


def cell_setup(
    exp: ExperimentConfig, noise_rate: float, seed: int
) -> tuple[TrainConfig, DatasetSplit]:
    """Materialize the training config and dataset for one grid cell."""
    g1, g2, data_seed, noise_seed = derive_seeds(seed)
    if exp.dataset_file:
        dataset = load_dataset(exp.dataset_file)
        if not dataset.labeled or not dataset.test:
            raise ConfigurationError(f"{exp.dataset_file}: needs labeled and test samples")
    else:
        dataset = make_synthetic_dataset(
            num_classes=exp.classes,
            n_labeled_per_class=exp.labeled_per_class,
            n_unlabeled=exp.unlabeled_count,
            n_test_per_class=exp.test_per_class,
            cluster_spread=exp.cluster_spread,
            class_imbalance=exp.class_imbalance or None,
            seed=data_seed,
            feature_dim=exp.feature_dim,
        )
    input_dim = int(dataset.labeled[0].x.size)
    max_label = max(ex.y for ex in dataset.labeled + dataset.test)
    if max_label >= exp.classes:
        raise ConfigurationError(f"dataset label {max_label} exceeds classes = {exp.classes}")
    net = NetConfig(input_dim, exp.hidden_dims, exp.classes, exp.activation)
    schedules = ScheduleConfig(
        abandon_rate=resolve_abandon_rate(exp, noise_rate),
        turning_iteration=exp.turning_iteration,
        total_epochs=exp.epochs,
        base_lr=exp.base_lr,
        lr_decay_epoch=exp.lr_decay_epoch,
        decayed_lr=exp.decayed_lr,
        rampup_max=exp.rampup_max,
        ema_cap=exp.ema_cap,
    )
    noise = None
    if exp.noise_kind != "none":
        pair = tuple(exp.noise_pair) if exp.noise_kind == "asymmetric" else None
        noise = NoiseSpec(kind=exp.noise_kind, rate=noise_rate, swap_pair=pair, seed=noise_seed)
    confidence = None
    if exp.confidence_enabled:
        confidence = ConfidenceConfig(
            threshold=exp.confidence_threshold,
            penalty_weight=exp.confidence_penalty,
            budget_target=exp.confidence_budget,
            enabled=True,
            class_keep_prob=dict(exp.class_keep_probs) or None,
        )
    train_cfg = TrainConfig(
        net=net,
        schedules=schedules,
        batch_size=exp.batch_size,
        labeled_fraction=exp.labeled_fraction,
        aug=AugmentationSpec(gaussian_sigma=exp.aug_sigma, flip_axes=exp.aug_flip_pairs),
        momentum=exp.momentum,
        weight_decay=exp.weight_decay,
        guidance=exp.guidance,
        selection_mode=exp.selection_mode,
        seeds=Seeds(group1=g1, group2=g2, data=data_seed),
        noise=noise,
        confidence=confidence,
    )
    return train_cfg, dataset
