import math
from fractions import Fraction

import numpy as np
import pytest

from proteach.errors import ContractViolationError
from proteach.net import NetConfig, ce_loss, forward, init_params, softmax, zeros_like
from proteach.selection import (
    confidence_rescue,
    kept_count,
    per_sample_ce,
    select_small_loss,
)

from gradcheck import random_net


def oracle_select(losses, ratio):
    """Full sort with explicit (loss, index) keys; exact rational kept count."""
    n = len(losses)
    k = math.ceil(Fraction(ratio) * n)
    order = sorted(range(n), key=lambda i: (losses[i], i))
    return sorted(order[:k]), sorted(order[k:])


class TestPerSampleCe:
    def test_uniform_teacher(self):
        cfg = NetConfig(4, (3,), 7)
        teacher = zeros_like(init_params(cfg, np.random.default_rng(0)))
        batch = [(np.random.default_rng(i).normal(size=4), i % 7) for i in range(10)]
        losses = per_sample_ce(teacher, batch, cfg)
        np.testing.assert_allclose(losses, math.log(7), atol=1e-9)

    def test_batch_of_one(self):
        rng = np.random.default_rng(1)
        cfg, teacher = random_net(rng)
        x = rng.normal(size=cfg.input_dim)
        got = per_sample_ce(teacher, [(x, 1)], cfg)
        y = np.zeros(cfg.num_classes)
        y[1] = 1.0
        want = ce_loss(softmax(forward(teacher, x, cfg).logits), y)
        assert got.shape == (1,)
        assert got[0] == pytest.approx(want, abs=1e-12)

    def test_matches_per_sample_loop(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            cfg, teacher = random_net(rng)
            batch = [
                (rng.normal(size=cfg.input_dim), int(rng.integers(cfg.num_classes)))
                for _ in range(rng.integers(1, 12))
            ]
            got = per_sample_ce(teacher, batch, cfg)
            for i, (x, label) in enumerate(batch):
                y = np.zeros(cfg.num_classes)
                y[label] = 1.0
                want = ce_loss(softmax(forward(teacher, x, cfg).logits), y)
                assert got[i] == pytest.approx(want, abs=1e-12)

    def test_empty_batch_raises(self):
        cfg = NetConfig(2, (), 2)
        teacher = init_params(cfg, np.random.default_rng(0))
        with pytest.raises(ContractViolationError):
            per_sample_ce(teacher, [], cfg)


class TestSelectSmallLoss:
    def test_hand_example(self):
        res = select_small_loss(np.array([0.1, 2.3, 0.5, 9.0]), 0.75)
        assert res.kept_indices == (0, 1, 2)
        assert res.abandoned_indices == (3,)

    def test_keep_everything_at_ratio_one(self):
        res = select_small_loss(np.array([3.0, 1.0, 2.0]), 1.0)
        assert res.kept_indices == (0, 1, 2)
        assert res.abandoned_indices == ()

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(1, 64))
            losses = rng.normal(size=n)
            if n > 3:  # inject duplicates to exercise the tie rule
                losses[rng.integers(n)] = losses[rng.integers(n)]
            ratio = float(rng.uniform(0.01, 1.0))
            res = select_small_loss(losses, ratio)
            kept, abandoned = oracle_select(losses, ratio)
            assert list(res.kept_indices) == kept
            assert list(res.abandoned_indices) == abandoned

    def test_ties_break_to_lower_index(self):
        res = select_small_loss(np.array([1.0, 1.0, 1.0, 1.0]), 0.5)
        assert res.kept_indices == (0, 1)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        losses = rng.normal(size=20)
        ratio = 0.4
        base = set(select_small_loss(losses, ratio).kept_indices)
        for _ in range(10):
            perm = rng.permutation(20)
            permuted = select_small_loss(losses[perm], ratio)
            mapped = {int(perm[i]) for i in permuted.kept_indices}
            assert mapped == base  # no ties in a continuous draw

    def test_kept_count_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 100))
            ratio = float(rng.uniform(0.001, 1.0))
            res = select_small_loss(rng.normal(size=n), ratio)
            assert len(res.kept_indices) == kept_count(ratio, n)
            assert len(res.kept_indices) + len(res.abandoned_indices) == n
            assert not set(res.kept_indices) & set(res.abandoned_indices)
            if res.abandoned_indices:
                kept_losses = res.per_sample_loss[list(res.kept_indices)]
                dropped = res.per_sample_loss[list(res.abandoned_indices)]
                assert kept_losses.max() <= dropped.min()

    def test_kept_count_uses_exact_arithmetic(self):
        # the double 0.1 is just above 1/10, so its exact product with 30
        # lands above 3 and the minimal kept count satisfying >= ratio*n is 4;
        # 0.35 stores just below 7/20, so 0.35*20 stays below 7
        assert kept_count(0.1, 30) == 4
        assert kept_count(0.35, 20) == 7
        assert kept_count(0.75, 4) == 3
        assert kept_count(0.5, 10) == 5

    def test_bad_inputs(self):
        with pytest.raises(ContractViolationError):
            select_small_loss(np.array([]), 0.5)
        with pytest.raises(ContractViolationError):
            select_small_loss(np.array([1.0]), 0.0)
        with pytest.raises(ContractViolationError):
            select_small_loss(np.array([np.inf]), 0.5)


class TestConfidenceRescue:
    def _result(self):
        # 0.375 = 3/8 is exactly representable: ceil(0.375*5) = 2 kept
        return select_small_loss(np.array([0.1, 0.2, 3.0, 4.0, 5.0]), 0.375)

    def test_no_rescue_without_confidence(self):
        res = self._result()
        out = confidence_rescue(
            res, np.zeros(3), 0.9, None, [0, 1, 2, 3, 4], np.random.default_rng(0)
        )
        assert out.kept_indices == res.kept_indices
        assert out.abandoned_indices == res.abandoned_indices

    def test_threshold_rescues_confident_sample(self):
        res = self._result()
        out = confidence_rescue(
            res, np.array([0.95, 0.1, 0.1]), 0.9, None, [0, 1, 2, 3, 4], np.random.default_rng(0)
        )
        assert 2 in out.kept_indices
        assert out.abandoned_indices == (3, 4)

    def test_probability_one_class_always_kept(self):
        res = self._result()
        labels = [0, 0, 6, 6, 1]
        for seed in range(5):
            out = confidence_rescue(
                res, np.zeros(3), 0.9, {6: 1.0}, labels, np.random.default_rng(seed)
            )
            assert 2 in out.kept_indices and 3 in out.kept_indices
            assert out.abandoned_indices == (4,)

    def test_rescue_only_grows_kept(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            losses = rng.normal(size=12)
            res = select_small_loss(losses, 0.5)
            conf = rng.uniform(size=len(res.abandoned_indices))
            labels = rng.integers(0, 3, size=12)
            out = confidence_rescue(res, conf, 0.8, {0: 0.3}, labels, rng)
            assert set(res.kept_indices) <= set(out.kept_indices)
            assert set(out.kept_indices) | set(out.abandoned_indices) == set(range(12))

    def test_misaligned_confidences_raise(self):
        res = self._result()
        with pytest.raises(ContractViolationError):
            confidence_rescue(res, np.zeros(2), 0.9, None, [0] * 5, np.random.default_rng(0))
