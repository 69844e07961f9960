"""Training loops: the dual-group cross-guided run, baselines, evaluation, audits.

The main loop keeps two student/teacher pairs. Each iteration, both teachers
rank the labeled part of a shared mini-batch by cross entropy and keep the
current small-loss fraction; each student then trains on the kept samples and
matches the output distribution of its guiding teacher (the other group's
under cross-guidance) over the whole batch. Teachers trail their students by
exponential weight averaging.

Randomness is split into independent per-purpose streams (batching, student
views, teacher views, confidence, rescue, retraining phases), all derived from
the data seed. That keeps degenerate configurations exactly equal to the
simpler trainers they reduce to: turning off selection, consistency and the
unlabeled pool reproduces plain supervised training step for step, and a
single same-guided group reproduces an averaged-teacher consistency run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .confidence import ConfidenceConfig, ConfidenceTrainer
from .data import (
    AugmentationSpec,
    DatasetSplit,
    LabeledExample,
    MiniBatch,
    MiniBatchStream,
    augment_batch,
)
from .ema import TeacherState, ema_update, init_teacher
from .errors import ConfigurationError, ContractViolationError, DivergenceError
from .net import (
    CE_EPS,
    GradSet,
    NetConfig,
    ParamSet,
    backward_batch,
    forward_batch,
    init_params,
    sgd_momentum_step,
    softmax,
    zeros_like,
)
from .noise import NoiseAudit, NoiseSpec, apply_noise
from .schedules import (
    ScheduleConfig,
    ema_coefficient,
    learning_rate,
    rampup_weight,
    selection_ratio,
)
from .selection import SelectionResult, confidence_rescue, select_small_loss

FINAL_EVAL_PERIOD = 50

GUIDANCE_MODES = ("cross", "same")
SELECTION_MODES = ("progressive", "fixed")
BASELINE_KINDS = ("finetune", "mean_teacher", "pseudo_label")


@dataclass(frozen=True)
class Seeds:
    group1: int
    group2: int
    data: int


@dataclass(frozen=True)
class TrainConfig:
    net: NetConfig
    schedules: ScheduleConfig
    batch_size: int
    labeled_fraction: float
    aug: AugmentationSpec
    momentum: float = 0.9
    weight_decay: float = 0.0005
    guidance: str = "cross"
    selection_mode: str = "progressive"
    seeds: Seeds = Seeds(0, 1, 2)
    noise: NoiseSpec | None = None
    confidence: ConfidenceConfig | None = None

    def __post_init__(self):
        if self.guidance not in GUIDANCE_MODES:
            raise ConfigurationError(f"guidance must be one of {GUIDANCE_MODES}")
        if self.selection_mode not in SELECTION_MODES:
            raise ConfigurationError(f"selection_mode must be one of {SELECTION_MODES}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum must be in [0, 1)")
        if self.weight_decay < 0.0:
            raise ConfigurationError("weight_decay must be >= 0")


@dataclass
class GroupState:
    student: ParamSet
    velocity: ParamSet
    teacher: TeacherState


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray  # (C, C) counts, rows = true class
    per_class_recall: np.ndarray


@dataclass
class IterationRecord:
    iteration: int  # 1-based
    epoch: int
    ratio: float
    omega: float
    alpha: float
    lr: float
    supervised_loss: tuple[float, ...]  # one entry per group
    consistency_loss: tuple[float, ...]
    total_loss: tuple[float, ...]
    kept_counts: tuple[int, ...]
    abandoned_positions: tuple[tuple[int, ...], ...]  # labeled-pool positions per group


@dataclass
class TrainHistory:
    model_names: tuple[str, ...]
    iterations: list[IterationRecord] = field(default_factory=list)
    epoch_metrics: list[dict[str, Metrics]] = field(default_factory=list)
    final_evals: list[dict[str, Metrics]] = field(default_factory=list)
    stable_accuracy: dict[str, float] = field(default_factory=dict)
    noise_audit: NoiseAudit | None = None
    diverged: bool = False
    divergence_note: str | None = None


@dataclass
class AbandonTally:
    """Abandoned-sample events split into injected-noise vs clean per class."""

    noise_events: int
    clean_events_per_class: np.ndarray

    @property
    def total(self) -> int:
        return self.noise_events + int(self.clean_events_per_class.sum())

    @property
    def noise_fraction(self) -> float:
        return self.noise_events / self.total if self.total else 0.0


@dataclass
class BatchViews:
    """One mini-batch under both augmentation views, labeled rows first."""

    student_inputs: np.ndarray
    teacher_inputs: np.ndarray
    labels: np.ndarray
    n_labeled: int
    labeled_positions: np.ndarray  # positions into the labeled pool


class SnetLoss(NamedTuple):
    total: float
    supervised: float
    consistency: float
    grads: GradSet


def evaluate(model: ParamSet, test: Sequence[LabeledExample], cfg: NetConfig) -> Metrics:
    """Accuracy, confusion counts and per-class recall; no test-time augmentation."""
    if not test:
        raise ContractViolationError("test set is empty")
    xs = np.stack([ex.x for ex in test])
    ys = np.array([ex.y for ex in test], dtype=np.intp)
    probs = softmax(forward_batch(model, xs, cfg).logits)
    pred = probs.argmax(axis=1)
    c = cfg.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (ys, pred), 1)
    diag = np.diag(confusion).astype(np.float64)
    rows = confusion.sum(axis=1)
    recall = np.where(rows > 0, diag / np.maximum(rows, 1), 0.0)
    return Metrics(
        accuracy=float(diag.sum() / confusion.sum()),
        confusion=confusion,
        per_class_recall=recall,
    )


def loss_snet(
    student: ParamSet,
    teacher_other: TeacherState,
    kept_labeled: Sequence[int],
    views: BatchViews,
    omega: float,
    cfg: NetConfig,
    teacher_probs: np.ndarray | None = None,
) -> SnetLoss:
    """Supervised CE over the kept samples plus omega times the consistency term.

    The supervised term averages over the kept labeled samples only (0 when
    none are kept); the consistency term averages the squared distance between
    student and teacher output distributions over every sample in the batch.
    Gradients flow through the student only.
    """
    kept = np.asarray(sorted(kept_labeled), dtype=np.intp)
    if kept.size and (kept.min() < 0 or kept.max() >= views.n_labeled):
        raise ContractViolationError("kept indices must address the labeled part")
    trace = forward_batch(student, views.student_inputs, cfg)
    probs = softmax(trace.logits)
    if teacher_probs is None:
        teacher_probs = softmax(
            forward_batch(teacher_other.weights, views.teacher_inputs, cfg).logits
        )
    n = probs.shape[0]
    diff = probs - teacher_probs
    consistency = float((diff * diff).sum(axis=1).mean())
    upstream = (2.0 / n) * diff
    dlogits = omega * (probs * upstream - probs * (probs * upstream).sum(axis=1, keepdims=True))
    if kept.size:
        y = views.labels[kept]
        p_true = probs[kept, y]
        supervised = float(-np.log(p_true + CE_EPS).mean())
        k = kept.size
        dlogits[kept] += probs[kept] / k
        dlogits[kept, y] -= 1.0 / k
    else:
        supervised = 0.0
    grads = backward_batch(trace, student, dlogits, cfg)
    return SnetLoss(supervised + omega * consistency, supervised, consistency, grads)


def _spawn_streams(data_seed: int) -> dict[str, np.random.Generator]:
    names = (
        "batch",
        "student_view",
        "teacher_view",
        "confidence",
        "rescue",
        "phase2_batch",
        "phase2_view",
        "spare",
    )
    children = np.random.SeedSequence(data_seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def _init_group(cfg: NetConfig, seed: int) -> GroupState:
    student = init_params(cfg, np.random.default_rng(seed))
    return GroupState(student=student, velocity=zeros_like(student), teacher=init_teacher(student))


def _noisy_labeled(
    data: DatasetSplit, config: TrainConfig
) -> tuple[list[LabeledExample], NoiseAudit | None]:
    if config.noise is None or config.noise.rate == 0.0:
        if config.noise is not None:
            # rate-0 spec still produces an (all-clean) audit
            labels = np.array([ex.y for ex in data.labeled], dtype=np.intp)
            _, audit = apply_noise(labels, config.noise, config.net.num_classes)
            return list(data.labeled), audit
        return list(data.labeled), None
    labels = np.array([ex.y for ex in data.labeled], dtype=np.intp)
    noisy, audit = apply_noise(labels, config.noise, config.net.num_classes)
    relabeled = [
        LabeledExample(x=ex.x, y=int(noisy[i]), id=ex.id) for i, ex in enumerate(data.labeled)
    ]
    return relabeled, audit


def _stack_batch(batch: MiniBatch) -> tuple[np.ndarray, np.ndarray]:
    xs = [ex.x for ex in batch.labeled_part] + [ex.x for ex in batch.unlabeled_part]
    labels = np.array([ex.y for ex in batch.labeled_part], dtype=np.intp)
    return np.stack(xs), labels


def _make_views(
    batch: MiniBatch,
    aug: AugmentationSpec,
    student_rng: np.random.Generator,
    teacher_rng: np.random.Generator,
    pos_of_id: dict[int, int],
) -> BatchViews:
    xs, labels = _stack_batch(batch)
    return BatchViews(
        student_inputs=augment_batch(xs, aug, student_rng),
        teacher_inputs=augment_batch(xs, aug, teacher_rng),
        labels=labels,
        n_labeled=len(batch.labeled_part),
        labeled_positions=np.array([pos_of_id[ex.id] for ex in batch.labeled_part], dtype=np.intp),
    )


def _teacher_ce_rows(teacher_probs: np.ndarray, views: BatchViews) -> np.ndarray:
    rows = np.arange(views.n_labeled)
    return -np.log(teacher_probs[rows, views.labels] + CE_EPS)


def _rescue(
    conf: ConfidenceTrainer,
    sel: SelectionResult,
    views: BatchViews,
    config: ConfidenceConfig,
    rng: np.random.Generator,
) -> SelectionResult:
    if not sel.abandoned_indices:
        return sel
    scores = conf.rescue_scores(views.teacher_inputs[list(sel.abandoned_indices)])
    return confidence_rescue(sel, scores, config.threshold, config.class_keep_prob, views.labels, rng)


def _eval_pair(g1: GroupState, g2: GroupState, test, cfg: NetConfig) -> dict[str, Metrics]:
    return {
        "student1": evaluate(g1.student, test, cfg),
        "student2": evaluate(g2.student, test, cfg),
        "teacher1": evaluate(g1.teacher.weights, test, cfg),
        "teacher2": evaluate(g2.teacher.weights, test, cfg),
    }


def _finish_history(history: TrainHistory) -> None:
    if history.final_evals:
        history.stable_accuracy = {
            name: float(np.mean([ev[name].accuracy for ev in history.final_evals]))
            for name in history.model_names
        }


def _check_data(data: DatasetSplit) -> None:
    if not data.labeled or not data.test:
        raise ConfigurationError("need nonempty labeled and test pools")


def train_pt(config: TrainConfig, data: DatasetSplit) -> tuple[GroupState, GroupState, TrainHistory]:
    """Run the full two-group training loop for N epochs.

    Returns both group states and the history (per-iteration records,
    per-epoch test metrics for all four models, final-epoch evaluations and
    their mean as the stable accuracy). A nonfinite loss aborts the run and
    leaves a diagnostic note in the history instead of raising.
    """
    _check_data(data)
    labeled, audit = _noisy_labeled(data, config)
    streams = _spawn_streams(config.seeds.data)
    g1 = _init_group(config.net, config.seeds.group1)
    g2 = _init_group(config.net, config.seeds.group2)
    conf = None
    if config.confidence is not None and config.confidence.enabled:
        conf = ConfidenceTrainer(config.net, config.confidence, streams["confidence"])
    stream = MiniBatchStream(
        labeled, data.unlabeled, config.batch_size, config.labeled_fraction, streams["batch"]
    )
    pos_of_id = {ex.id: i for i, ex in enumerate(labeled)}
    sch = config.schedules
    bpe = stream.batches_per_epoch
    history = TrainHistory(
        model_names=("student1", "student2", "teacher1", "teacher2"), noise_audit=audit
    )
    net_cfg = config.net
    t = 0
    for epoch in range(sch.total_epochs):
        lr = learning_rate(epoch, sch)
        final_epoch = epoch == sch.total_epochs - 1
        for b in range(bpe):
            t += 1
            batch = stream.next_batch()
            views = _make_views(
                batch, config.aug, streams["student_view"], streams["teacher_view"], pos_of_id
            )
            if config.selection_mode == "progressive":
                ratio = selection_ratio(t, sch)
            else:
                ratio = 1.0 - sch.abandon_rate
            omega = rampup_weight((t - 1) / bpe, sch)
            alpha = ema_coefficient(t - 1, sch)

            # teacher states from the end of the previous iteration drive both
            # the selection and the consistency targets
            q1 = softmax(forward_batch(g1.teacher.weights, views.teacher_inputs, net_cfg).logits)
            q2 = softmax(forward_batch(g2.teacher.weights, views.teacher_inputs, net_cfg).logits)
            sel1 = select_small_loss(_teacher_ce_rows(q1, views), ratio)
            sel2 = select_small_loss(_teacher_ce_rows(q2, views), ratio)
            if conf is not None:
                sel1 = _rescue(conf, sel1, views, config.confidence, streams["rescue"])
                sel2 = _rescue(conf, sel2, views, config.confidence, streams["rescue"])
            if config.guidance == "cross":
                pick1, guide1, probs1 = sel2, g2.teacher, q2
                pick2, guide2, probs2 = sel1, g1.teacher, q1
            else:
                pick1, guide1, probs1 = sel1, g1.teacher, q1
                pick2, guide2, probs2 = sel2, g2.teacher, q2
            try:
                r1 = loss_snet(g1.student, guide1, pick1.kept_indices, views, omega, net_cfg, probs1)
                r2 = loss_snet(g2.student, guide2, pick2.kept_indices, views, omega, net_cfg, probs2)
                if not (np.isfinite(r1.total) and np.isfinite(r2.total)):
                    raise DivergenceError(f"nonfinite loss ({r1.total}, {r2.total})")
                s1, v1 = sgd_momentum_step(
                    g1.student, r1.grads, g1.velocity, lr, config.momentum, config.weight_decay
                )
                s2, v2 = sgd_momentum_step(
                    g2.student, r2.grads, g2.velocity, lr, config.momentum, config.weight_decay
                )
            except DivergenceError as exc:
                history.diverged = True
                history.divergence_note = f"iteration {t}: {exc}"
                _finish_history(history)
                return g1, g2, history
            g1 = GroupState(s1, v1, ema_update(g1.teacher, s1, alpha))
            g2 = GroupState(s2, v2, ema_update(g2.teacher, s2, alpha))
            if conf is not None:
                conf.train_step(
                    views.student_inputs[: views.n_labeled],
                    views.labels,
                    lr,
                    config.momentum,
                    config.weight_decay,
                    alpha,
                )
            history.iterations.append(
                IterationRecord(
                    iteration=t,
                    epoch=epoch,
                    ratio=ratio,
                    omega=omega,
                    alpha=alpha,
                    lr=lr,
                    supervised_loss=(r1.supervised, r2.supervised),
                    consistency_loss=(r1.consistency, r2.consistency),
                    total_loss=(r1.total, r2.total),
                    kept_counts=(len(pick1.kept_indices), len(pick2.kept_indices)),
                    abandoned_positions=(
                        tuple(int(views.labeled_positions[i]) for i in sel1.abandoned_indices),
                        tuple(int(views.labeled_positions[i]) for i in sel2.abandoned_indices),
                    ),
                )
            )
            if final_epoch and (b + 1) % FINAL_EVAL_PERIOD == 0 and (b + 1) != bpe:
                history.final_evals.append(_eval_pair(g1, g2, data.test, net_cfg))
        epoch_eval = _eval_pair(g1, g2, data.test, net_cfg)
        history.epoch_metrics.append(epoch_eval)
        if final_epoch:
            history.final_evals.append(epoch_eval)
    _finish_history(history)
    return g1, g2, history


def _supervised_phase(
    params: ParamSet,
    velocity: ParamSet,
    labeled: list[LabeledExample],
    unlabeled,
    config: TrainConfig,
    labeled_fraction: float,
    batch_rng: np.random.Generator,
    view_rng: np.random.Generator,
    test,
    history: TrainHistory,
    epoch_offset: int,
) -> tuple[ParamSet, ParamSet]:
    """Plain supervised loop over the labeled part of each batch."""
    stream = MiniBatchStream(labeled, unlabeled, config.batch_size, labeled_fraction, batch_rng)
    sch = config.schedules
    bpe = stream.batches_per_epoch
    cfg = config.net
    t = len(history.iterations)
    for epoch in range(sch.total_epochs):
        lr = learning_rate(epoch, sch)
        final_epoch = epoch == sch.total_epochs - 1
        for b in range(bpe):
            t += 1
            batch = stream.next_batch()
            xs = np.stack([ex.x for ex in batch.labeled_part])
            labels = np.array([ex.y for ex in batch.labeled_part], dtype=np.intp)
            inputs = augment_batch(xs, config.aug, view_rng)
            trace = forward_batch(params, inputs, cfg)
            probs = softmax(trace.logits)
            n = len(labels)
            rows = np.arange(n)
            supervised = float(-np.log(probs[rows, labels] + CE_EPS).mean())
            dlogits = probs / n
            dlogits[rows, labels] -= 1.0 / n
            grads = backward_batch(trace, params, dlogits, cfg)
            try:
                if not np.isfinite(supervised):
                    raise DivergenceError(f"nonfinite loss {supervised}")
                params, velocity = sgd_momentum_step(
                    params, grads, velocity, lr, config.momentum, config.weight_decay
                )
            except DivergenceError as exc:
                history.diverged = True
                history.divergence_note = f"iteration {t}: {exc}"
                return params, velocity
            history.iterations.append(
                IterationRecord(
                    iteration=t,
                    epoch=epoch_offset + epoch,
                    ratio=1.0,
                    omega=0.0,
                    alpha=0.0,
                    lr=lr,
                    supervised_loss=(supervised,),
                    consistency_loss=(0.0,),
                    total_loss=(supervised,),
                    kept_counts=(n,),
                    abandoned_positions=((),),
                )
            )
            if final_epoch and (b + 1) % FINAL_EVAL_PERIOD == 0 and (b + 1) != bpe:
                history.final_evals.append({"student1": evaluate(params, test, cfg)})
        epoch_eval = {"student1": evaluate(params, test, cfg)}
        history.epoch_metrics.append(epoch_eval)
        if final_epoch:
            history.final_evals.append(epoch_eval)
    return params, velocity


def _train_finetune(config: TrainConfig, data: DatasetSplit) -> tuple[ParamSet, TrainHistory]:
    labeled, audit = _noisy_labeled(data, config)
    streams = _spawn_streams(config.seeds.data)
    params = init_params(config.net, np.random.default_rng(config.seeds.group1))
    history = TrainHistory(model_names=("student1",), noise_audit=audit)
    params, _ = _supervised_phase(
        params,
        zeros_like(params),
        labeled,
        data.unlabeled,
        config,
        config.labeled_fraction,
        streams["batch"],
        streams["student_view"],
        data.test,
        history,
        epoch_offset=0,
    )
    _finish_history(history)
    return params, history


def _train_mean_teacher(config: TrainConfig, data: DatasetSplit) -> tuple[GroupState, TrainHistory]:
    """One student/teacher pair, no sample selection, own-teacher consistency."""
    _check_data(data)
    labeled, audit = _noisy_labeled(data, config)
    streams = _spawn_streams(config.seeds.data)
    group = _init_group(config.net, config.seeds.group1)
    stream = MiniBatchStream(
        labeled, data.unlabeled, config.batch_size, config.labeled_fraction, streams["batch"]
    )
    pos_of_id = {ex.id: i for i, ex in enumerate(labeled)}
    sch = config.schedules
    bpe = stream.batches_per_epoch
    cfg = config.net
    history = TrainHistory(model_names=("student1", "teacher1"), noise_audit=audit)
    t = 0
    for epoch in range(sch.total_epochs):
        lr = learning_rate(epoch, sch)
        final_epoch = epoch == sch.total_epochs - 1
        for b in range(bpe):
            t += 1
            batch = stream.next_batch()
            views = _make_views(
                batch, config.aug, streams["student_view"], streams["teacher_view"], pos_of_id
            )
            omega = rampup_weight((t - 1) / bpe, sch)
            alpha = ema_coefficient(t - 1, sch)
            result = loss_snet(
                group.student, group.teacher, range(views.n_labeled), views, omega, cfg
            )
            try:
                if not np.isfinite(result.total):
                    raise DivergenceError(f"nonfinite loss {result.total}")
                student, velocity = sgd_momentum_step(
                    group.student, result.grads, group.velocity, lr, config.momentum, config.weight_decay
                )
            except DivergenceError as exc:
                history.diverged = True
                history.divergence_note = f"iteration {t}: {exc}"
                _finish_history(history)
                return group, history
            group = GroupState(student, velocity, ema_update(group.teacher, student, alpha))
            history.iterations.append(
                IterationRecord(
                    iteration=t,
                    epoch=epoch,
                    ratio=1.0,
                    omega=omega,
                    alpha=alpha,
                    lr=lr,
                    supervised_loss=(result.supervised,),
                    consistency_loss=(result.consistency,),
                    total_loss=(result.total,),
                    kept_counts=(views.n_labeled,),
                    abandoned_positions=((),),
                )
            )
            if final_epoch and (b + 1) % FINAL_EVAL_PERIOD == 0 and (b + 1) != bpe:
                history.final_evals.append(
                    {
                        "student1": evaluate(group.student, data.test, cfg),
                        "teacher1": evaluate(group.teacher.weights, data.test, cfg),
                    }
                )
        epoch_eval = {
            "student1": evaluate(group.student, data.test, cfg),
            "teacher1": evaluate(group.teacher.weights, data.test, cfg),
        }
        history.epoch_metrics.append(epoch_eval)
        if final_epoch:
            history.final_evals.append(epoch_eval)
    _finish_history(history)
    return group, history


def _train_pseudo_label(config: TrainConfig, data: DatasetSplit) -> tuple[ParamSet, TrainHistory]:
    """Supervised run, argmax-label the unlabeled pool, retrain on the union.

    The retrain starts from the same initialization and runs fully labeled
    batches over the union pool for another N epochs.
    """
    labeled, audit = _noisy_labeled(data, config)
    streams = _spawn_streams(config.seeds.data)
    init_rng_state = np.random.default_rng(config.seeds.group1)
    params = init_params(config.net, init_rng_state)
    history = TrainHistory(model_names=("student1",), noise_audit=audit)
    params, _ = _supervised_phase(
        params,
        zeros_like(params),
        labeled,
        data.unlabeled,
        config,
        config.labeled_fraction,
        streams["batch"],
        streams["student_view"],
        data.test,
        history,
        epoch_offset=0,
    )
    if history.diverged:
        _finish_history(history)
        return params, history
    history.final_evals.clear()  # the phase-2 model is the one reported
    xs = np.stack([ex.x for ex in data.unlabeled])
    preds = softmax(forward_batch(params, xs, config.net).logits).argmax(axis=1)
    union = list(labeled) + [
        LabeledExample(x=ex.x, y=int(preds[i]), id=ex.id) for i, ex in enumerate(data.unlabeled)
    ]
    params2 = init_params(config.net, np.random.default_rng(config.seeds.group1))
    params2, _ = _supervised_phase(
        params2,
        zeros_like(params2),
        union,
        [],
        config,
        1.0,
        streams["phase2_batch"],
        streams["phase2_view"],
        data.test,
        history,
        epoch_offset=config.schedules.total_epochs,
    )
    _finish_history(history)
    return params2, history


def train_baseline(
    kind: str, config: TrainConfig, data: DatasetSplit
) -> tuple[ParamSet | GroupState, TrainHistory]:
    _check_data(data)
    if kind == "finetune":
        return _train_finetune(config, data)
    if kind == "mean_teacher":
        return _train_mean_teacher(config, data)
    if kind == "pseudo_label":
        return _train_pseudo_label(config, data)
    raise ConfigurationError(f"unknown baseline {kind!r}, expected one of {BASELINE_KINDS}")


def audit_abandoned(
    history: TrainHistory,
    audit: NoiseAudit,
    num_classes: int | None = None,
    since_iteration: int = 0,
) -> AbandonTally:
    """Count abandonment events by injected-noise status and original class.

    Every (iteration, group, sample) abandonment is one event; events before
    since_iteration are skipped so tallies can focus on the settled phase.
    """
    if audit is None:
        raise ContractViolationError("a noise audit is required")
    if num_classes is None:
        num_classes = int(audit.original_labels.max()) + 1 if audit.original_labels.size else 1
    clean = np.zeros(num_classes, dtype=np.int64)
    noise_events = 0
    for rec in history.iterations:
        if rec.iteration < since_iteration:
            continue
        for group_positions in rec.abandoned_positions:
            for pos in group_positions:
                if audit.flip_mask[pos]:
                    noise_events += 1
                else:
                    clean[audit.original_labels[pos]] += 1
    return AbandonTally(noise_events=noise_events, clean_events_per_class=clean)
