import numpy as np
import pytest

from proteach.data import (
    AugmentationSpec,
    DatasetSplit,
    MiniBatchStream,
    augment,
    augment_batch,
    class_centers,
    load_dataset,
    make_synthetic_dataset,
    save_dataset,
)
from proteach.errors import ConfigurationError

# frozen from a seeded run of the default benchmark (clean, seed 0); the
# supervised baseline must land strictly between chance and perfect
PINNED_BASELINE_ACCURACY = 0.8492857142857142


class TestMakeSyntheticDataset:
    def test_separable_limit_nearest_centroid(self):
        split = make_synthetic_dataset(5, 20, 50, 10, cluster_spread=1e-9, seed=0)
        centers = class_centers(5, 8)
        for ex in split.test:
            dists = np.linalg.norm(centers - ex.x, axis=1)
            assert int(dists.argmin()) == ex.y

    def test_uniform_multipliers_keep_counts_equal(self):
        split = make_synthetic_dataset(
            4, 25, 40, 5, cluster_spread=0.3, class_imbalance=(1.0, 1.0, 1.0, 1.0), seed=1
        )
        counts = np.bincount([ex.y for ex in split.labeled], minlength=4)
        assert np.array_equal(counts, [25, 25, 25, 25])

    def test_imbalance_scales_labeled_pool(self):
        split = make_synthetic_dataset(
            3, 100, 60, 5, cluster_spread=0.3, class_imbalance=(1.0, 0.2, 0.5), seed=2
        )
        counts = np.bincount([ex.y for ex in split.labeled], minlength=3)
        assert np.array_equal(counts, [100, 20, 50])
        test_counts = np.bincount([ex.y for ex in split.test], minlength=3)
        assert np.array_equal(test_counts, [5, 5, 5])  # test stays balanced

    def test_ids_unique_and_pools_disjoint(self):
        split = make_synthetic_dataset(3, 10, 20, 5, cluster_spread=0.3, seed=3)
        ids = [ex.id for ex in split.labeled] + [ex.id for ex in split.unlabeled] + [
            ex.id for ex in split.test
        ]
        assert len(ids) == len(set(ids))

    def test_reproducible_per_seed(self):
        a = make_synthetic_dataset(3, 10, 20, 5, cluster_spread=0.3, seed=4)
        b = make_synthetic_dataset(3, 10, 20, 5, cluster_spread=0.3, seed=4)
        for x, y in zip(a.labeled, b.labeled):
            assert np.array_equal(x.x, y.x) and x.y == y.y

    def test_pinned_supervised_baseline(self):
        from proteach.config import build_experiment_config, cell_setup
        from proteach.trainer import train_baseline

        exp = build_experiment_config({"seeds": (0,)})
        cfg, data = cell_setup(exp, 0.0, 0)
        _, hist = train_baseline("finetune", cfg, data)
        acc = hist.stable_accuracy["student1"]
        assert 1.0 / 7.0 < acc < 1.0
        assert acc == pytest.approx(PINNED_BASELINE_ACCURACY, abs=1e-9)


class TestAugment:
    def test_identity_without_noise_or_flips(self):
        spec = AugmentationSpec(gaussian_sigma=0.0)
        x = np.array([1.0, 2.0, 3.0])
        out = augment(x, spec, np.random.default_rng(0))
        assert np.array_equal(out, x)
        assert out is not x

    def test_forced_pair_swap(self):
        spec = AugmentationSpec(gaussian_sigma=0.0, flip_axes=((0, 1),))
        x = np.array([1.0, 2.0, 3.0])
        swapped = unswapped = 0
        for seed in range(20):
            out = augment(x, spec, np.random.default_rng(seed))
            if np.array_equal(out, np.array([2.0, 1.0, 3.0])):
                swapped += 1
            elif np.array_equal(out, x):
                unswapped += 1
        assert swapped + unswapped == 20 and swapped > 0 and unswapped > 0

    def test_noise_mean_near_zero(self):
        spec = AugmentationSpec(gaussian_sigma=0.1)
        rng = np.random.default_rng(1)
        x = np.zeros(1)
        draws = augment_batch(np.zeros((100_000, 1)), spec, rng)
        se = 0.1 / np.sqrt(100_000)
        assert abs(draws.mean()) < 3 * se
        assert abs(augment(x, spec, rng)).shape == (1,)

    def test_length_preserved(self):
        spec = AugmentationSpec(gaussian_sigma=0.5, flip_axes=((1, 3),))
        rng = np.random.default_rng(2)
        out = augment(np.zeros(6), spec, rng)
        assert out.shape == (6,)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ConfigurationError):
            AugmentationSpec(gaussian_sigma=-0.1)


def _tiny_split(n_labeled=13, n_unlabeled=31):
    return make_synthetic_dataset(3, n_labeled, n_unlabeled, 2, cluster_spread=0.3, seed=7)


class TestMiniBatchStream:
    def test_exact_part_sizes(self):
        split = _tiny_split()
        stream = MiniBatchStream(split.labeled, split.unlabeled, 8, 0.25, np.random.default_rng(0))
        batch = stream.next_batch()
        assert len(batch.labeled_part) == 2
        assert len(batch.unlabeled_part) == 6

    def test_reference_composition(self):
        split = make_synthetic_dataset(2, 150, 300, 2, cluster_spread=0.3, seed=0)
        stream = MiniBatchStream(split.labeled, split.unlabeled, 200, 0.25, np.random.default_rng(0))
        batch = stream.next_batch()
        assert len(batch.labeled_part) == 50 and len(batch.unlabeled_part) == 150

    def test_fully_labeled_batches(self):
        split = _tiny_split()
        stream = MiniBatchStream(split.labeled, [], 6, 1.0, np.random.default_rng(0))
        batch = stream.next_batch()
        assert len(batch.unlabeled_part) == 0 and len(batch.labeled_part) == 6
        assert stream.batches_per_epoch == (3 * 13) // 6

    def test_unlabeled_without_replacement_within_epoch(self):
        split = _tiny_split(n_unlabeled=30)
        stream = MiniBatchStream(split.labeled, split.unlabeled, 12, 1 / 6, np.random.default_rng(1))
        assert stream.batches_per_epoch == 3
        seen = []
        for _ in range(stream.batches_per_epoch):
            seen += [ex.id for ex in stream.next_batch().unlabeled_part]
        assert len(seen) == len(set(seen)) == 30

    def test_replay_oracle(self):
        # replicate the queue semantics with the same seed stream
        split = _tiny_split()
        seed = 42
        stream = MiniBatchStream(split.labeled, split.unlabeled, 10, 0.4, np.random.default_rng(seed))
        got_l, got_u = [], []
        for _ in range(2 * stream.batches_per_epoch):
            b = stream.next_batch()
            got_l.append([ex.id for ex in b.labeled_part])
            got_u.append([ex.id for ex in b.unlabeled_part])

        rng = np.random.default_rng(seed)
        lq, uq = [], []
        want_l, want_u = [], []
        for _ in range(2 * stream.batches_per_epoch):
            lab = []
            while len(lab) < 4:
                if not lq:
                    lq = list(rng.permutation(len(split.labeled)))
                lab.append(lq.pop(0))
            if len(uq) < 6:
                uq = list(rng.permutation(len(split.unlabeled)))
            unl, uq = uq[:6], uq[6:]
            want_l.append([split.labeled[i].id for i in lab])
            want_u.append([split.unlabeled[i].id for i in unl])
        assert got_l == want_l and got_u == want_u

    def test_labeled_recycles_with_bounded_repeats(self):
        split = _tiny_split(n_labeled=5)  # 15 labeled total
        stream = MiniBatchStream(split.labeled, split.unlabeled, 10, 0.4, np.random.default_rng(3))
        ids = []
        for _ in range(stream.batches_per_epoch):
            ids += [ex.id for ex in stream.next_batch().labeled_part]
        # drew len(ids) samples from a 15-sample pool with reshuffle-recycling
        counts = np.bincount(ids, minlength=15)
        assert counts.max() <= int(np.ceil(len(ids) / 15)) + 1

    def test_non_integer_labeled_part_rejected(self):
        split = _tiny_split()
        with pytest.raises(ConfigurationError):
            MiniBatchStream(split.labeled, split.unlabeled, 10, 0.33, np.random.default_rng(0))

    def test_tolerates_decimal_fraction(self):
        split = _tiny_split()
        MiniBatchStream(split.labeled, split.unlabeled, 30, 0.1, np.random.default_rng(0))

    def test_pool_too_small_rejected(self):
        split = _tiny_split(n_unlabeled=3)
        with pytest.raises(ConfigurationError):
            MiniBatchStream(split.labeled, split.unlabeled, 40, 0.25, np.random.default_rng(0))


class TestDatasetFiles:
    def test_round_trip_exact(self, tmp_path):
        split = _tiny_split()
        path = tmp_path / "data.txt"
        save_dataset(split, path, header={"purpose": "test"})
        loaded = load_dataset(path)
        assert len(loaded.labeled) == len(split.labeled)
        assert len(loaded.unlabeled) == len(split.unlabeled)
        assert len(loaded.test) == len(split.test)
        for a, b in zip(split.labeled + split.test, loaded.labeled + loaded.test):
            assert a.id == b.id and a.y == b.y
            assert np.array_equal(a.x, b.x)
        for a, b in zip(split.unlabeled, loaded.unlabeled):
            assert a.id == b.id and np.array_equal(a.x, b.x)

    def test_rejects_malformed_lines(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("[labeled]\n0\t1\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_dataset(path)
        path.write_text("0\t1\t0.0 1.0\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_dataset(path)
