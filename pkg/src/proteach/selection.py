"""Small-loss sample selection driven by teacher predictions.

Within a mini-batch, labeled samples are ranked by the teacher's per-sample
cross entropy; the lowest-loss fraction is kept for the supervised term and
the rest are abandoned. An optional confidence rescue moves high-confidence
abandoned samples back into the kept set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractViolationError
from .net import CE_EPS, NetConfig, ParamSet, forward_batch, softmax


@dataclass
class SelectionResult:
    kept_indices: tuple[int, ...]  # ascending batch-local indices into the labeled part
    abandoned_indices: tuple[int, ...]
    per_sample_loss: np.ndarray


def per_sample_ce(
    teacher: ParamSet, labeled_batch: Sequence[tuple[np.ndarray, int]], cfg: NetConfig
) -> np.ndarray:
    """Teacher cross-entropy loss per labeled sample.

    Inputs arrive already augmented; this routine is deterministic.
    """
    if len(labeled_batch) == 0:
        raise ContractViolationError("labeled batch is empty")
    xs = np.stack([np.asarray(x, dtype=np.float64) for x, _ in labeled_batch])
    ys = np.array([y for _, y in labeled_batch], dtype=np.intp)
    probs = softmax(forward_batch(teacher, xs, cfg).logits)
    return -np.log(probs[np.arange(len(ys)), ys] + CE_EPS)


def kept_count(ratio: float, n: int) -> int:
    """ceil(ratio*n) computed on the exact rational value of the float ratio."""
    return int(math.ceil(Fraction(ratio) * n))


def select_small_loss(losses: np.ndarray, ratio: float) -> SelectionResult:
    """Keep the ceil(ratio*n) smallest-loss indices; ties go to the lower index."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ContractViolationError("losses must be a nonempty vector")
    if not 0.0 < ratio <= 1.0:
        raise ContractViolationError("ratio must be in (0, 1]")
    if not np.isfinite(losses).all():
        raise ContractViolationError("losses must be finite")
    k = kept_count(ratio, losses.size)
    order = np.argsort(losses, kind="stable")
    kept = tuple(sorted(int(i) for i in order[:k]))
    abandoned = tuple(sorted(int(i) for i in order[k:]))
    return SelectionResult(kept, abandoned, losses)


def confidence_rescue(
    result: SelectionResult,
    confidences: np.ndarray,
    threshold: float,
    class_keep_prob: Mapping[int, float] | None,
    labels: Sequence[int],
    rng: np.random.Generator,
) -> SelectionResult:
    """Move abandoned samples back into the kept set.

    Samples whose confidence exceeds the threshold are always rescued. Each
    remaining abandoned sample of class c is then independently rescued with
    probability class_keep_prob[c] (missing classes default to 0, so no draw
    is made for them). `labels` indexes the whole labeled part, like
    per_sample_loss. Rescue only ever grows the kept set.
    """
    confidences = np.asarray(confidences, dtype=np.float64)
    if confidences.shape != (len(result.abandoned_indices),):
        raise ContractViolationError("confidences must align with abandoned_indices")
    if not 0.0 <= threshold <= 1.0:
        raise ContractViolationError("threshold must be in [0, 1]")
    if confidences.size and not ((confidences >= 0.0) & (confidences <= 1.0)).all():
        raise ContractViolationError("confidences must be in [0, 1]")
    keep_prob = dict(class_keep_prob or {})
    rescued = []
    still_abandoned = []
    for idx, conf in zip(result.abandoned_indices, confidences):
        if conf > threshold:
            rescued.append(idx)
        else:
            still_abandoned.append(idx)
    remaining = []
    for idx in still_abandoned:
        p = keep_prob.get(int(labels[idx]), 0.0)
        if p > 0.0 and rng.random() < p:
            rescued.append(idx)
        else:
            remaining.append(idx)
    kept = tuple(sorted(result.kept_indices + tuple(rescued)))
    return SelectionResult(kept, tuple(sorted(remaining)), result.per_sample_loss)
