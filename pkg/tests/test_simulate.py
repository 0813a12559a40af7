import numpy as np
import pytest
from scipy.stats import kstest

from burstlab import (
    SyntheticSpec,
    generate_dataset,
    seeded_stream,
    split_dataset,
    thinning_sample,
)


class TestThinningSample:
    def test_zero_base_rate_empty(self):
        seq = thinning_sample(0.0, 0.9, 1.0, 100.0, seeded_stream(0, 9))
        assert seq.n_events == 0

    def test_strictly_increasing_within_horizon(self):
        seq = thinning_sample(1.0, 0.6, 1.0, 300.0, seeded_stream(1, 9))
        assert np.all(np.diff(seq.times) > 0)
        assert seq.times[0] >= 0.0
        assert seq.times[-1] <= 300.0
        assert seq.horizon == 300.0

    def test_deterministic_given_seed(self):
        a = thinning_sample(1.5, 0.4, 1.0, 50.0, seeded_stream(7, 9))
        b = thinning_sample(1.5, 0.4, 1.0, 50.0, seeded_stream(7, 9))
        np.testing.assert_array_equal(a.times, b.times)

    def test_poisson_count_single_draw(self):
        seq = thinning_sample(2.0, 0.0, 1.0, 500.0, seeded_stream(3, 9))
        assert abs(seq.n_events - 1000) <= 3 * np.sqrt(1000)

    def test_poisson_count_mean_over_draws(self):
        counts = [
            thinning_sample(2.0, 0.0, 1.0, 500.0, seeded_stream(4, 9, d)).n_events
            for d in range(200)
        ]
        assert abs(np.mean(counts) - 1000.0) <= 10.0  # within 1%

    def test_poisson_gaps_exponential(self):
        # a=0 gaps must be iid Exponential(u); KS at significance 0.01
        rng = seeded_stream(5, 9)
        gaps = []
        while len(gaps) < 5000:
            seq = thinning_sample(2.0, 0.0, 1.0, 2000.0, rng)
            gaps.extend(np.diff(seq.times).tolist())
        result = kstest(np.asarray(gaps[:5000]), "expon", args=(0.0, 0.5))
        assert result.pvalue > 0.01

    def test_subcritical_mean_count(self):
        # branching-process expectation: u * T / (1 - a)
        counts = [
            thinning_sample(1.0, 0.5, 1.0, 2000.0, seeded_stream(6, 9, d)).n_events
            for d in range(200)
        ]
        assert abs(np.mean(counts) - 4000.0) / 4000.0 < 0.05

    def test_supercritical_warns(self):
        with pytest.warns(RuntimeWarning, match="supercritical"):
            thinning_sample(0.5, 1.1, 1.0, 1.0, seeded_stream(8, 9))

    def test_burstiness_signature(self):
        from burstlab import interarrival_stats

        seq = thinning_sample(0.5, 0.9, 1.0, 2000.0, seeded_stream(9, 9))
        stats = interarrival_stats(seq)
        assert stats.coefficient_of_variation > 1.0
        assert stats.lag1_autocorrelation is not None
        assert stats.lag1_autocorrelation > 0.0

    def test_rejects_bad_args(self):
        rng = seeded_stream(0, 9)
        with pytest.raises(ValueError):
            thinning_sample(-1.0, 0.5, 1.0, 10.0, rng)
        with pytest.raises(ValueError):
            thinning_sample(1.0, 0.5, 0.0, 10.0, rng)
        with pytest.raises(ValueError):
            thinning_sample(1.0, 0.5, 1.0, 0.0, rng)


class TestSyntheticSpec:
    def test_defaults_valid(self):
        spec = SyntheticSpec()
        assert spec.n_assignments == 10 and spec.n_students == 60

    def test_rejects_supercritical_mean(self):
        with pytest.raises(ValueError, match="supercritical"):
            SyntheticSpec(
                n_clusters=1, cluster_gammas=((4.0, 0.3),)
            )

    def test_rejects_zero_students(self):
        with pytest.raises(ValueError, match="positive"):
            SyntheticSpec(n_students=0, n_clusters=1, cluster_gammas=((4.0, 0.1),))

    def test_rejects_wrong_gamma_count(self):
        with pytest.raises(ValueError, match="per cluster"):
            SyntheticSpec(n_clusters=2, cluster_gammas=((4.0, 0.1),))


def small_spec(**overrides):
    base = dict(
        n_assignments=4,
        n_students=8,
        n_clusters=2,
        cluster_gammas=((4.0, 0.025), (4.0, 0.1)),
        base_rate_range=(0.5, 1.5),
        horizon=30.0,
        seed=11,
    )
    base.update(overrides)
    return SyntheticSpec(**base)


class TestGenerateDataset:
    def test_deterministic(self):
        spec = small_spec()
        ds1, truth1 = generate_dataset(spec)
        ds2, truth2 = generate_dataset(spec)
        np.testing.assert_array_equal(truth1.excitement, truth2.excitement)
        for pair in ds1.sequences:
            np.testing.assert_array_equal(
                ds1.sequences[pair].times, ds2.sequences[pair].times
            )

    def test_all_pairs_observed(self):
        ds, _ = generate_dataset(small_spec())
        assert ds.n_observed == 4 * 8

    def test_labels_and_truncation(self):
        ds, truth = generate_dataset(small_spec())
        assert set(np.unique(truth.labels)) <= {0, 1}
        assert truth.excitement.max() < 0.95
        assert truth.base_rate.min() >= 0.5 and truth.base_rate.max() <= 1.5

    def test_single_cluster_law_of_large_numbers(self):
        # unit-mean check at 600 draws; (4, 0.025) has negligible truncation
        spec = SyntheticSpec(
            n_assignments=10,
            n_students=60,
            n_clusters=1,
            cluster_gammas=((4.0, 0.025),),
            horizon=1.0,
            seed=3,
        )
        _, truth = generate_dataset(spec)
        mean = truth.excitement.mean()
        se = truth.excitement.std(ddof=1) / np.sqrt(truth.excitement.size)
        assert abs(mean - 0.1) <= 3 * se

    def test_seed_override(self):
        spec = small_spec(seed=1)
        _, t1 = generate_dataset(spec, seed=2)
        _, t2 = generate_dataset(spec.__class__(**{**spec.__dict__, "seed": 2}))
        np.testing.assert_array_equal(t1.excitement, t2.excitement)


class TestSplitDataset:
    def test_no_unseen_when_ratio_zero(self):
        ds, _ = generate_dataset(small_spec())
        split = split_dataset(ds, 0.0, 0.7, seeded_stream(0, 2))
        assert split.unseen_pairs == []

    def test_ceiling_arithmetic(self):
        from burstlab import EventDataset, EventSequence

        times = np.arange(1.0, 11.0)  # 10 events
        ds = EventDataset(
            1, 1, {(0, 0): EventSequence(pair=(0, 0), times=times, horizon=10.0)}
        )
        split = split_dataset(ds, 0.0, 0.7, seeded_stream(0, 2))
        train_seq = split.train.sequences[(0, 0)]
        assert train_seq.n_events == 7
        assert train_seq.horizon == 7.0
        assert split.seen_test[(0, 0)].tolist() == [8.0, 9.0, 10.0]

    def test_unseen_count_and_location(self):
        ds, _ = generate_dataset(small_spec())
        split = split_dataset(ds, 0.25, 0.7, seeded_stream(5, 2))
        # ceil(0.25 * 8) = 2 students, last two assignments each
        assert len(split.unseen_pairs) == 4
        assert all(i in (2, 3) for i, _ in split.unseen_pairs)
        for pair in split.unseen_pairs:
            assert pair not in split.train.sequences

    def test_partition_exact(self):
        ds, _ = generate_dataset(small_spec())
        split = split_dataset(ds, 0.3, 0.7, seeded_stream(7, 2))
        unseen = set(split.unseen_pairs)
        for pair, seq in ds.sequences.items():
            if pair in unseen:
                assert pair not in split.train.sequences
                continue
            merged = np.concatenate(
                [split.train.sequences[pair].times, split.seen_test[pair]]
            )
            np.testing.assert_array_equal(merged, seq.times)

    def test_train_horizon_is_last_train_event(self):
        ds, _ = generate_dataset(small_spec())
        split = split_dataset(ds, 0.0, 0.5, seeded_stream(1, 2))
        for pair, seq in split.train.sequences.items():
            if seq.n_events:
                assert seq.horizon == seq.times[-1]

    def test_error_when_nothing_left(self):
        from burstlab import EventDataset, EventSequence

        # single student, two assignments; selecting them leaves nothing
        seqs = {
            (i, 0): EventSequence(pair=(i, 0), times=[1.0], horizon=1.0)
            for i in range(2)
        }
        ds = EventDataset(2, 1, seqs)
        with pytest.raises(ValueError, match="no observed pairs"):
            split_dataset(ds, 0.9, 0.7, seeded_stream(0, 2))

    def test_bad_ratios_rejected(self):
        ds, _ = generate_dataset(small_spec())
        with pytest.raises(ValueError):
            split_dataset(ds, 1.0, 0.7, seeded_stream(0, 2))
        with pytest.raises(ValueError):
            split_dataset(ds, 0.1, 0.0, seeded_stream(0, 2))
