import math

import numpy as np
import pytest

from proteach.errors import ConfigurationError
from proteach.schedules import (
    ScheduleConfig,
    ema_coefficient,
    learning_rate,
    preset_abandon_rate,
    rampup_weight,
    selection_ratio,
)

REF = ScheduleConfig(
    abandon_rate=0.05,
    turning_iteration=300,
    total_epochs=6,
    base_lr=0.01,
    lr_decay_epoch=3,
    decayed_lr=0.001,
)


class TestSelectionRatio:
    def test_starts_at_one(self):
        for r in (0.0, 0.05, 0.4):
            cfg = ScheduleConfig(r, 300, 6, 0.01, 3, 0.001)
            assert selection_ratio(0, cfg) == 1.0

    def test_reference_values(self):
        assert selection_ratio(300, REF) == pytest.approx(0.95, abs=1e-15)
        assert selection_ratio(150, REF) == pytest.approx(0.975, abs=1e-15)

    def test_flat_after_turning_iteration(self):
        for t in (300, 301, 1000, 10**6):
            assert selection_ratio(t, REF) == 0.95

    def test_piecewise_linear_and_monotone(self):
        values = [selection_ratio(t, REF) for t in range(0, 900)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert min(values) == 0.95 and max(values) == 1.0
        # single breakpoint at T: constant slope before, zero after
        before = np.diff(values[:300])
        np.testing.assert_allclose(before, before[0], atol=1e-15)
        assert all(v == 0.95 for v in values[300:])


class TestRampupWeight:
    def test_peak_at_final_epoch(self):
        assert rampup_weight(6, REF) == 10.0
        assert rampup_weight(8, REF) == 10.0  # clamped above N

    def test_start_value(self):
        assert rampup_weight(0, REF) == pytest.approx(10 * math.exp(-5), rel=1e-12)
        assert rampup_weight(0, REF) == pytest.approx(0.067379, abs=1e-6)

    def test_midpoint(self):
        assert rampup_weight(3, REF) == pytest.approx(10 * math.exp(-1.25), rel=1e-12)
        assert rampup_weight(3, REF) == pytest.approx(2.8650, abs=1e-4)

    def test_strictly_increasing_and_bounded(self):
        grid = np.linspace(0, 6, 500)
        vals = [rampup_weight(e, REF) for e in grid]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert all(v <= 10.0 for v in vals)


class TestEmaCoefficient:
    def test_zero_at_first_iteration(self):
        assert ema_coefficient(0, REF) == 0.0

    def test_half_at_second(self):
        assert ema_coefficient(1, REF) == 0.5

    def test_cap(self):
        assert ema_coefficient(10000, REF) == 0.999
        for it in range(1000, 5000, 37):
            assert ema_coefficient(it, REF) == 0.999

    def test_below_one_and_nondecreasing(self):
        vals = [ema_coefficient(it, REF) for it in range(0, 3000, 7)]
        assert all(v < 1.0 for v in vals)
        assert all(a <= b for a, b in zip(vals, vals[1:]))


class TestLearningRate:
    def test_reference_schedule(self):
        assert learning_rate(0, REF) == 0.01
        assert learning_rate(2, REF) == 0.01
        assert learning_rate(3, REF) == 0.001
        assert learning_rate(5, REF) == 0.001


class TestPresets:
    def test_clean(self):
        assert preset_abandon_rate("none", 0.0) == 0.05
        assert preset_abandon_rate("symmetric", 0.0) == 0.05

    def test_symmetric(self):
        assert preset_abandon_rate("symmetric", 0.3) == pytest.approx(0.4)
        assert preset_abandon_rate("symmetric", 0.1) == pytest.approx(0.2)

    def test_asymmetric(self):
        assert preset_abandon_rate("asymmetric", 0.1) == 0.05
        assert preset_abandon_rate("asymmetric", 0.2) == 0.10

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            preset_abandon_rate("weird", 0.1)


class TestConfigValidation:
    def test_rejects_bad_rates(self):
        with pytest.raises(ConfigurationError):
            ScheduleConfig(1.0, 300, 6, 0.01, 3, 0.001)
        with pytest.raises(ConfigurationError):
            ScheduleConfig(0.05, 0, 6, 0.01, 3, 0.001)
        with pytest.raises(ConfigurationError):
            ScheduleConfig(0.05, 300, 6, 0.001, 3, 0.01)  # decayed above base
