"""Time-varying scalars of the training loop.

Four schedules drive a run: the kept-sample ratio R(t) over iterations, the
unsupervised ramp-up weight over (fractional) epochs, the teacher averaging
coefficient over iterations, and the stepped learning rate over epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class ScheduleConfig:
    abandon_rate: float  # r: fraction of labeled samples dropped once the ratio bottoms out
    turning_iteration: int  # T: iteration at which R(t) reaches its floor
    total_epochs: int  # N
    base_lr: float
    lr_decay_epoch: int
    decayed_lr: float
    rampup_max: float = 10.0
    ema_cap: float = 0.999

    def __post_init__(self):
        if not 0.0 <= self.abandon_rate < 1.0:
            raise ConfigurationError("abandon_rate must be in [0, 1)")
        if self.turning_iteration < 1:
            raise ConfigurationError("turning_iteration must be >= 1")
        if self.total_epochs < 1:
            raise ConfigurationError("total_epochs must be >= 1")
        if not self.base_lr > self.decayed_lr > 0.0:
            raise ConfigurationError("need base_lr > decayed_lr > 0")
        if self.rampup_max < 0.0:
            raise ConfigurationError("rampup_max must be >= 0")
        if not 0.0 <= self.ema_cap < 1.0:
            raise ConfigurationError("ema_cap must be in [0, 1)")


def selection_ratio(t: float, cfg: ScheduleConfig) -> float:
    """R(t) = 1 - r*min(t/T, 1): linear decay to 1-r, flat afterwards."""
    return 1.0 - cfg.abandon_rate * min(t / cfg.turning_iteration, 1.0)


def rampup_weight(epoch: float, cfg: ScheduleConfig) -> float:
    """w(epoch) = rampup_max * exp(-5*(1 - epoch/N)^2), epoch clamped to [0, N]."""
    e = min(max(epoch, 0.0), float(cfg.total_epochs))
    frac = 1.0 - e / cfg.total_epochs
    return cfg.rampup_max * math.exp(-5.0 * frac * frac)


def ema_coefficient(iteration: int, cfg: ScheduleConfig) -> float:
    """alpha(iter) = min(1 - 1/(1+iter), cap); 0 at the first iteration."""
    return min(1.0 - 1.0 / (1.0 + iteration), cfg.ema_cap)


def learning_rate(epoch: int, cfg: ScheduleConfig) -> float:
    """Step decay: base_lr before lr_decay_epoch, decayed_lr from then on."""
    return cfg.base_lr if epoch < cfg.lr_decay_epoch else cfg.decayed_lr


def preset_abandon_rate(noise_kind: str, noise_rate: float) -> float:
    """Default abandon rate r for a given injected-noise setting.

    Clean data uses 0.05. Symmetric noise at rate r' uses r' + 0.1. Asymmetric
    noise uses 0.05 at a 10% rate and 0.10 otherwise (a stricter variant,
    0.10/0.15, suits noisier label sources).
    """
    if noise_kind == "none" or noise_rate == 0.0:
        return 0.05
    if noise_kind == "symmetric":
        return min(noise_rate + 0.1, 0.95)
    if noise_kind == "asymmetric":
        return 0.05 if noise_rate <= 0.1 else 0.10
    raise ConfigurationError(f"unknown noise kind {noise_kind!r}")
