"""Synthetic label noise with ground-truth bookkeeping for audits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError

NOISE_KINDS = ("symmetric", "asymmetric")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "symmetric" | "asymmetric"
    rate: float
    swap_pair: tuple[int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ConfigurationError("noise rate must be in [0, 1)")
        if self.kind == "asymmetric":
            if self.swap_pair is None or self.swap_pair[0] == self.swap_pair[1]:
                raise ConfigurationError("asymmetric noise needs two distinct classes")


@dataclass
class NoiseAudit:
    """flip_mask[i] is true exactly where the injected label differs from the original."""

    flip_mask: np.ndarray
    original_labels: np.ndarray


def _flip_count(rate: float, n: int) -> int:
    # round-half-to-even, matching Python round()
    return min(n, int(round(rate * n)))


def inject_symmetric(
    labels: np.ndarray, rate: float, num_classes: int, seed: int
) -> tuple[np.ndarray, NoiseAudit]:
    """Flip round(rate*n_c) samples per class to a uniformly random other class."""
    if not 0.0 <= rate < 1.0:
        raise ContractViolationError("rate must be in [0, 1)")
    labels = np.asarray(labels, dtype=np.intp)
    rng = np.random.default_rng(seed)
    noisy = labels.copy()
    flip_mask = np.zeros(labels.size, dtype=bool)
    for c in range(num_classes):
        idx = np.flatnonzero(labels == c)
        n_flip = _flip_count(rate, idx.size)
        if n_flip == 0:
            continue
        chosen = rng.choice(idx, size=n_flip, replace=False)
        offsets = rng.integers(0, num_classes - 1, size=n_flip)
        noisy[chosen] = offsets + (offsets >= c)  # skip the original class
        flip_mask[chosen] = True
    return noisy, NoiseAudit(flip_mask=flip_mask, original_labels=labels.copy())


def inject_asymmetric(
    labels: np.ndarray, rate: float, pair: tuple[int, int], seed: int
) -> tuple[np.ndarray, NoiseAudit]:
    """Relabel round(rate*n_a) samples of class a to b and vice versa."""
    if not 0.0 <= rate < 1.0:
        raise ContractViolationError("rate must be in [0, 1)")
    a, b = pair
    if a == b:
        raise ContractViolationError("swap classes must differ")
    labels = np.asarray(labels, dtype=np.intp)
    rng = np.random.default_rng(seed)
    noisy = labels.copy()
    flip_mask = np.zeros(labels.size, dtype=bool)
    for src, dst in ((a, b), (b, a)):
        idx = np.flatnonzero(labels == src)
        if idx.size == 0:
            raise ContractViolationError(f"class {src} is absent from the labels")
        n_flip = _flip_count(rate, idx.size)
        if n_flip == 0:
            continue
        chosen = rng.choice(idx, size=n_flip, replace=False)
        noisy[chosen] = dst
        flip_mask[chosen] = True
    return noisy, NoiseAudit(flip_mask=flip_mask, original_labels=labels.copy())


def apply_noise(
    labels: np.ndarray, spec: NoiseSpec, num_classes: int
) -> tuple[np.ndarray, NoiseAudit]:
    if spec.kind == "symmetric":
        return inject_symmetric(labels, spec.rate, num_classes, spec.seed)
    return inject_asymmetric(labels, spec.rate, spec.swap_pair, spec.seed)
