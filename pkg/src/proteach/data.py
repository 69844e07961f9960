"""Synthetic benchmark data: generation, augmentation, batching, file I/O.

The benchmark draws one Gaussian cluster per class, centered on a unit ring in
the first two feature dimensions; remaining dimensions carry pure cluster
noise. Unlabeled points come from the same mixture with their labels dropped.
Everything is reproducible from seeds.

Dataset files are plain text. Lines starting with '#' are comments, a line of
the form "[labeled]", "[unlabeled]" or "[test]" switches the current pool, and
every other nonempty line is one sample:

    id <TAB> label <TAB> f1 f2 ... fD

with an empty label field for unlabeled samples. Floats are written with full
repr so a round trip is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

RING_RADIUS = 1.0


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    y: int
    id: int


@dataclass(frozen=True)
class UnlabeledExample:
    x: np.ndarray
    id: int


@dataclass
class DatasetSplit:
    labeled: list[LabeledExample]
    unlabeled: list[UnlabeledExample]
    test: list[LabeledExample]


@dataclass(frozen=True)
class AugmentationSpec:
    gaussian_sigma: float = 0.0
    flip_axes: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.gaussian_sigma) or self.gaussian_sigma < 0.0:
            raise ConfigurationError("gaussian_sigma must be finite and >= 0")
        object.__setattr__(self, "flip_axes", tuple(tuple(p) for p in self.flip_axes))


@dataclass
class MiniBatch:
    labeled_part: list[LabeledExample]
    unlabeled_part: list[UnlabeledExample]


def class_centers(num_classes: int, dim: int) -> np.ndarray:
    centers = np.zeros((num_classes, dim))
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    centers[:, 0] = RING_RADIUS * np.cos(angles)
    centers[:, 1] = RING_RADIUS * np.sin(angles)
    return centers


def make_synthetic_dataset(
    num_classes: int,
    n_labeled_per_class: int,
    n_unlabeled: int,
    n_test_per_class: int,
    cluster_spread: float,
    class_imbalance: tuple[float, ...] | None = None,
    seed: int = 0,
    feature_dim: int = 8,
) -> DatasetSplit:
    """Gaussian ring mixture split into labeled / unlabeled / test pools.

    class_imbalance multiplies the per-class labeled counts and reweights the
    unlabeled mixture the same way; the test pool stays balanced so per-class
    recall remains comparable across settings.
    """
    if num_classes < 2 or feature_dim < 2:
        raise ConfigurationError("need num_classes >= 2 and feature_dim >= 2")
    if min(n_labeled_per_class, n_unlabeled, n_test_per_class) < 1:
        raise ConfigurationError("all pool sizes must be >= 1")
    if class_imbalance is not None and len(class_imbalance) != num_classes:
        raise ConfigurationError("class_imbalance needs one multiplier per class")
    mult = np.ones(num_classes) if class_imbalance is None else np.asarray(class_imbalance, float)
    if (mult <= 0.0).any():
        raise ConfigurationError("class_imbalance multipliers must be positive")

    rng = np.random.default_rng(seed)
    centers = class_centers(num_classes, feature_dim)
    next_id = 0

    labeled: list[LabeledExample] = []
    for c in range(num_classes):
        n_c = max(1, int(round(mult[c] * n_labeled_per_class)))
        pts = centers[c] + rng.normal(0.0, cluster_spread, size=(n_c, feature_dim))
        for row in pts:
            labeled.append(LabeledExample(x=row, y=c, id=next_id))
            next_id += 1

    weights = mult / mult.sum()
    classes = rng.choice(num_classes, size=n_unlabeled, p=weights)
    pts = centers[classes] + rng.normal(0.0, cluster_spread, size=(n_unlabeled, feature_dim))
    unlabeled = []
    for row in pts:
        unlabeled.append(UnlabeledExample(x=row, id=next_id))
        next_id += 1

    test: list[LabeledExample] = []
    for c in range(num_classes):
        pts = centers[c] + rng.normal(0.0, cluster_spread, size=(n_test_per_class, feature_dim))
        for row in pts:
            test.append(LabeledExample(x=row, y=c, id=next_id))
            next_id += 1

    return DatasetSplit(labeled=labeled, unlabeled=unlabeled, test=test)


def augment(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """Gaussian feature noise plus each configured pair swap with probability 1/2."""
    out = np.array(x, dtype=np.float64, copy=True)
    if spec.gaussian_sigma > 0.0:
        out += rng.normal(0.0, spec.gaussian_sigma, size=out.shape)
    for i, j in spec.flip_axes:
        if rng.random() < 0.5:
            out[i], out[j] = out[j], out[i]
    return out


def augment_batch(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """Batched augmentation; rows are perturbed and swapped independently."""
    out = np.array(x, dtype=np.float64, copy=True)
    if spec.gaussian_sigma > 0.0:
        out += rng.normal(0.0, spec.gaussian_sigma, size=out.shape)
    for i, j in spec.flip_axes:
        mask = rng.random(out.shape[0]) < 0.5
        out[mask, i], out[mask, j] = out[mask, j], out[mask, i].copy()
    return out


class MiniBatchStream:
    """Epoch-aware mini-batch composition over the two pools.

    Unlabeled samples are drawn without replacement within an epoch; the
    smaller labeled pool is reshuffled and recycled whenever it runs out. One
    epoch is batches_per_epoch calls to next_batch(): a full pass over the
    unlabeled pool, or over the labeled pool when batches are fully labeled.
    """

    def __init__(self, labeled, unlabeled, batch_size, labeled_fraction, rng):
        if batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not 0.0 <= labeled_fraction <= 1.0:
            raise ConfigurationError("labeled_fraction must be in [0, 1]")
        exact = batch_size * labeled_fraction
        if abs(exact - round(exact)) > 1e-9:
            raise ConfigurationError(
                f"batch_size*labeled_fraction = {exact} is not an integer"
            )
        self.labeled = list(labeled)
        self.unlabeled = list(unlabeled)
        self.n_labeled_per_batch = int(round(exact))
        self.n_unlabeled_per_batch = batch_size - self.n_labeled_per_batch
        self._rng = rng
        if self.n_labeled_per_batch > 0 and not self.labeled:
            raise ConfigurationError("labeled pool is empty")
        if self.n_unlabeled_per_batch > 0 and len(self.unlabeled) < self.n_unlabeled_per_batch:
            raise ConfigurationError("unlabeled pool smaller than one batch")
        if self.n_unlabeled_per_batch > 0:
            self.batches_per_epoch = len(self.unlabeled) // self.n_unlabeled_per_batch
        else:
            self.batches_per_epoch = len(self.labeled) // max(self.n_labeled_per_batch, 1)
        if self.batches_per_epoch < 1:
            raise ConfigurationError("pools too small for a single batch per epoch")
        self._labeled_queue: list[int] = []
        self._unlabeled_queue: list[int] = []

    def _take_labeled(self, n: int) -> list[int]:
        taken: list[int] = []
        while len(taken) < n:
            if not self._labeled_queue:
                self._labeled_queue = list(self._rng.permutation(len(self.labeled)))
            taken.append(self._labeled_queue.pop(0))
        return taken

    def _take_unlabeled(self, n: int) -> list[int]:
        # leftover smaller than a batch is discarded at the epoch boundary
        if len(self._unlabeled_queue) < n:
            self._unlabeled_queue = list(self._rng.permutation(len(self.unlabeled)))
        taken = self._unlabeled_queue[:n]
        del self._unlabeled_queue[:n]
        return taken

    def next_batch(self) -> MiniBatch:
        lab_idx = self._take_labeled(self.n_labeled_per_batch)
        unl_idx = self._take_unlabeled(self.n_unlabeled_per_batch) if self.n_unlabeled_per_batch else []
        return MiniBatch(
            labeled_part=[self.labeled[i] for i in lab_idx],
            unlabeled_part=[self.unlabeled[i] for i in unl_idx],
        )


def _format_row(sample_id: int, label: int | None, x: np.ndarray) -> str:
    label_field = "" if label is None else str(int(label))
    features = " ".join(repr(float(v)) for v in x)
    return f"{sample_id}\t{label_field}\t{features}"


def save_dataset(split: DatasetSplit, path: str | Path, header: dict | None = None) -> None:
    lines = ["# dataset v1"]
    for key in sorted(header or {}):
        lines.append(f"# {key} = {header[key]}")
    lines.append("[labeled]")
    lines.extend(_format_row(ex.id, ex.y, ex.x) for ex in split.labeled)
    lines.append("[unlabeled]")
    lines.extend(_format_row(ex.id, None, ex.x) for ex in split.unlabeled)
    lines.append("[test]")
    lines.extend(_format_row(ex.id, ex.y, ex.x) for ex in split.test)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | Path) -> DatasetSplit:
    split = DatasetSplit(labeled=[], unlabeled=[], test=[])
    section = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("[labeled]", "[unlabeled]", "[test]"):
            section = line[1:-1]
            continue
        if section is None:
            raise ConfigurationError(f"{path}:{lineno}: sample before any section header")
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ConfigurationError(f"{path}:{lineno}: expected 3 tab-separated fields")
        sample_id = int(parts[0])
        x = np.array([float(v) for v in parts[2].split()], dtype=np.float64)
        if section == "unlabeled":
            if parts[1] != "":
                raise ConfigurationError(f"{path}:{lineno}: unlabeled sample has a label")
            split.unlabeled.append(UnlabeledExample(x=x, id=sample_id))
        else:
            if parts[1] == "":
                raise ConfigurationError(f"{path}:{lineno}: missing label")
            ex = LabeledExample(x=x, y=int(parts[1]), id=sample_id)
            (split.labeled if section == "labeled" else split.test).append(ex)
    return split
