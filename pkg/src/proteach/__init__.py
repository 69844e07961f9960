"""Noise-robust semi-supervised training with progressively selective teachers.

Two student/teacher pairs train side by side: teachers (exponential moving
averages of their students) rank labeled samples by loss and keep a shrinking
small-loss fraction, each student learns from the *other* group's teacher, and
every sample contributes an output-consistency term. The package ships the
training loops, plain supervised / averaged-teacher / pseudo-labeling
baselines, synthetic noisy benchmarks, and a batch experiment CLI.
"""

from .confidence import (
    ConfidenceConfig,
    ConfidenceNet,
    confidence_loss,
    forward_with_confidence,
    init_confidence_net,
    rescue_scores,
)
from .data import (
    AugmentationSpec,
    DatasetSplit,
    LabeledExample,
    MiniBatch,
    MiniBatchStream,
    UnlabeledExample,
    augment,
    load_dataset,
    make_synthetic_dataset,
    save_dataset,
)
from .ema import TeacherState, ema_update, init_teacher
from .errors import ConfigurationError, ContractViolationError, DivergenceError
from .net import (
    ForwardTrace,
    GradSet,
    NetConfig,
    ParamSet,
    backward,
    ce_loss,
    forward,
    init_params,
    lincomb,
    mse_consistency,
    sgd_momentum_step,
    softmax,
)
from .noise import NoiseAudit, NoiseSpec, inject_asymmetric, inject_symmetric
from .schedules import (
    ScheduleConfig,
    ema_coefficient,
    learning_rate,
    preset_abandon_rate,
    rampup_weight,
    selection_ratio,
)
from .selection import SelectionResult, confidence_rescue, per_sample_ce, select_small_loss
from .trainer import (
    GroupState,
    Metrics,
    Seeds,
    TrainConfig,
    TrainHistory,
    audit_abandoned,
    evaluate,
    loss_snet,
    train_baseline,
    train_pt,
)

__all__ = [name for name in dir() if not name.startswith("_")]
