"""Confidence estimation branch.

A separate small network scores how much its own class prediction can be
trusted, so that hard-but-clean samples can escape abandonment. The net shares
the classifier architecture but its output layer is one unit wider: the first
C outputs are class logits, the last is a confidence logit squashed through a
sigmoid. Training interpolates the prediction toward the label by the
confidence and penalizes low confidence; a budget controller keeps the mean
confidence near a target so the scores neither collapse nor saturate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ema import TeacherState, ema_update, init_teacher
from .errors import ConfigurationError
from .net import (
    CE_EPS,
    ForwardTrace,
    NetConfig,
    ParamSet,
    backward_batch,
    ce_loss,
    forward,
    forward_batch,
    init_params,
    sgd_momentum_step,
    softmax,
    zeros_like,
)

BUDGET_FACTOR = 1.01


@dataclass(frozen=True)
class ConfidenceConfig:
    threshold: float = 0.9
    penalty_weight: float = 0.1  # initial weight on the -log(c) term, adapted online
    budget_target: float = 0.8
    enabled: bool = True
    class_keep_prob: dict[int, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must be in [0, 1]")
        if self.penalty_weight <= 0.0:
            raise ConfigurationError("penalty_weight must be positive")
        if not 0.0 < self.budget_target < 1.0:
            raise ConfigurationError("budget_target must be in (0, 1)")
        for prob in (self.class_keep_prob or {}).values():
            if not 0.0 <= prob <= 1.0:
                raise ConfigurationError("class keep probabilities must be in [0, 1]")


@dataclass
class ConfidenceNet:
    """Trunk plus two heads packed as one net with C+1 output units."""

    params: ParamSet
    num_classes: int
    cfg: NetConfig  # output width num_classes + 1


def init_confidence_net(base: NetConfig, rng: np.random.Generator) -> ConfidenceNet:
    cfg = NetConfig(base.input_dim, base.hidden_dims, base.num_classes + 1, base.activation)
    params = init_params(cfg, rng)
    # confidence head starts at zero so scores open at sigmoid(0) = 0.5
    params.weights[-1][:, -1] = 0.0
    params.biases[-1][-1] = 0.0
    return ConfidenceNet(params=params, num_classes=base.num_classes, cfg=cfg)


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def forward_with_confidence(net: ConfidenceNet, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Class probabilities and confidence in (0, 1) for one feature vector."""
    trace = forward(net.params, x, net.cfg)
    probs = softmax(trace.logits[: net.num_classes])
    c = float(_sigmoid(trace.logits[net.num_classes : net.num_classes + 1])[0])
    return probs, c


def forward_with_confidence_batch(
    net: ConfidenceNet, xs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, ForwardTrace]:
    trace = forward_batch(net.params, xs, net.cfg)
    probs = softmax(trace.logits[:, : net.num_classes])
    conf = _sigmoid(trace.logits[:, net.num_classes])
    return probs, conf, trace


def confidence_loss(probs: np.ndarray, c: float, y_onehot: np.ndarray, penalty: float) -> float:
    """CE of the confidence-interpolated prediction plus a -log(c) penalty."""
    y = np.asarray(y_onehot, dtype=np.float64)
    hinted = c * np.asarray(probs, dtype=np.float64) + (1.0 - c) * y
    return ce_loss(hinted, y) + penalty * float(-np.log(c + CE_EPS))


def confidence_dlogits(
    probs: np.ndarray, conf: np.ndarray, labels: np.ndarray, penalty: float
) -> np.ndarray:
    """Per-sample gradient of confidence_loss at the C+1 raw outputs."""
    n, num_classes = probs.shape
    rows = np.arange(n)
    p_true = probs[rows, labels]
    hinted_true = conf * p_true + (1.0 - conf)  # y_true = 1
    g_true = -1.0 / (hinted_true + CE_EPS)  # dL/dhinted at the true class
    out = np.zeros((n, num_classes + 1))
    # class head: chain g through the interpolation (factor c) and softmax
    coeff = conf * g_true * p_true
    out[:, :num_classes] = -coeff[:, None] * probs
    out[rows, labels] += coeff
    # confidence head: dL/dc through the sigmoid
    dc = g_true * (p_true - 1.0) - penalty / (conf + CE_EPS)
    out[:, num_classes] = dc * conf * (1.0 - conf)
    return out


def rescue_scores(net: ConfidenceNet, xs: np.ndarray) -> np.ndarray:
    """Confidence per input row, aligned with the input order."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2:
        raise ConfigurationError("expected a (n, d) matrix of samples")
    trace = forward_batch(net.params, xs, net.cfg)
    return _sigmoid(trace.logits[:, net.num_classes])


class ConfidenceTrainer:
    """Online trainer for the confidence net, run alongside the main loop.

    The net trains on every labeled sample of each batch with its current
    (possibly noisy) label and keeps its own averaged-teacher copy; rescue
    scores always come from the teacher weights.
    """

    def __init__(self, base: NetConfig, config: ConfidenceConfig, rng: np.random.Generator):
        self.config = config
        self.net = init_confidence_net(base, rng)
        self.velocity = zeros_like(self.net.params)
        self.teacher: TeacherState = init_teacher(self.net.params)
        self.penalty = config.penalty_weight

    def rescue_scores(self, xs: np.ndarray) -> np.ndarray:
        teacher_net = ConfidenceNet(self.teacher.weights, self.net.num_classes, self.net.cfg)
        return rescue_scores(teacher_net, xs)

    def train_step(
        self,
        xs: np.ndarray,
        labels: np.ndarray,
        lr: float,
        momentum: float,
        weight_decay: float,
        alpha: float,
    ) -> None:
        probs, conf, trace = forward_with_confidence_batch(self.net, xs)
        dlogits = confidence_dlogits(probs, conf, labels, self.penalty) / len(labels)
        grads = backward_batch(trace, self.net.params, dlogits, self.net.cfg)
        params, self.velocity = sgd_momentum_step(
            self.net.params, grads, self.velocity, lr, momentum, weight_decay
        )
        self.net = ConfidenceNet(params, self.net.num_classes, self.net.cfg)
        self.teacher = ema_update(self.teacher, params, alpha)
        if conf.mean() < self.config.budget_target:
            self.penalty *= BUDGET_FACTOR
        else:
            self.penalty /= BUDGET_FACTOR
