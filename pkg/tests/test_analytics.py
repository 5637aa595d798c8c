import csv
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordlearn import analytics, corpus as oc
from ordlearn.errors import ValidationError


def brute_novelty_curve(ids, n, bin_size):
    """Independent oracle: hash-set scan over every n-gram position."""
    seen = set()
    flags = []
    for i in range(len(ids) - n + 1):
        key = tuple(int(x) for x in ids[i : i + n])
        flags.append(key not in seen)
        seen.add(key)
    curve, total = [], 0
    for start in range(0, len(flags), bin_size):
        total += sum(flags[start : start + bin_size])
        curve.append(total)
    return curve


class TestNovelNgramCurve:
    def test_unigram_bins_of_one(self):
        assert analytics.novel_ngram_curve([0, 1, 0, 1], 1, 1).cumulative_novel == [1, 2, 2, 2]

    def test_bigram_bins_of_one(self):
        assert analytics.novel_ngram_curve([0, 1, 0, 1], 2, 1).cumulative_novel == [1, 2, 2]

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        ids = rng.integers(0, 25, 3000).astype(np.uint32)
        for n in range(1, 7):
            for bin_size in (1, 13, 500, 5000):
                got = analytics.novel_ngram_curve(ids, n, bin_size).cumulative_novel
                assert got == brute_novelty_curve(ids, n, bin_size)

    def test_n_longer_than_stream_fails(self):
        with pytest.raises(ValidationError):
            analytics.novel_ngram_curve([0, 1], 3, 1)

    def test_final_unigram_count_is_type_count(self):
        rng = np.random.default_rng(2)
        ids = rng.integers(0, 40, 500).astype(np.uint32)
        curve = analytics.novel_ngram_curve(ids, 1, 64)
        assert curve.cumulative_novel[-1] == len(set(ids.tolist()))

    @given(st.lists(st.integers(0, 5), min_size=3, max_size=60))
    @settings(max_examples=100)
    def test_total_novelty_grows_with_n_up_to_tail(self, ids):
        for n in range(1, len(ids)):
            novel_n = analytics.novel_ngram_curve(ids, n, len(ids)).cumulative_novel[-1]
            novel_n1 = analytics.novel_ngram_curve(ids, n + 1, len(ids)).cumulative_novel[-1]
            assert novel_n <= novel_n1 + n

    @given(st.lists(st.integers(0, 8), min_size=1, max_size=50), st.integers(1, 10))
    @settings(max_examples=100)
    def test_curve_nondecreasing_and_bounded(self, ids, bin_size):
        curve = analytics.novel_ngram_curve(ids, 1, bin_size).cumulative_novel
        assert curve == sorted(curve)
        assert curve[-1] <= len(ids)


class TestPartitionEntropy:
    def test_constant_partition(self):
        assert analytics.partition_entropy([7, 7, 7, 7]) == 0.0

    def test_four_equiprobable_types(self):
        assert analytics.partition_entropy([0, 1, 2, 3]) == pytest.approx(2.0, abs=1e-12)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(4)
        ids = rng.integers(0, 60, 1000)
        counts = Counter(ids.tolist())
        expected = -sum((c / 1000) * math.log2(c / 1000) for c in counts.values())
        assert analytics.partition_entropy(ids) == pytest.approx(expected, abs=1e-12)

    def test_empty_partition_fails(self):
        with pytest.raises(ValidationError):
            analytics.partition_entropy([])

    @given(st.lists(st.integers(0, 30), min_size=1, max_size=200))
    @settings(max_examples=100)
    def test_bounds(self, ids):
        h = analytics.partition_entropy(ids)
        assert 0.0 <= h <= math.log2(len(ids)) + 1e-9

    def test_series_follows_visit_order(self):
        # five constant partitions with different type counts
        ids = np.concatenate([np.arange(k + 1, dtype=np.uint32).repeat(12)[:12] for k in range(5)])
        prepared = oc.partition_stream(ids, 5, oc.Shuffled(2))
        series = analytics.entropy_series(prepared)
        direct = [
            analytics.partition_entropy(prepared.ids[s:e])
            for s, e in (prepared.partitions[int(p)] for p in prepared.partition_order)
        ]
        assert series.per_partition_bits == direct


class TestRollingUtteranceStats:
    def test_constant_lengths(self):
        stats = analytics.rolling_utterance_stats([2, 2, 2, 2], window=2, step=2)
        assert stats.means == [2.0, 2.0]
        assert stats.stds == [0.0, 0.0]

    def test_two_point_population_std(self):
        stats = analytics.rolling_utterance_stats([1, 3], window=2, step=1)
        assert stats.means == [2.0]
        assert stats.stds == [1.0]

    def test_too_few_utterances(self):
        with pytest.raises(ValidationError):
            analytics.rolling_utterance_stats([1, 2], window=3, step=1)

    @given(
        st.lists(st.integers(0, 30), min_size=2, max_size=120),
        st.integers(2, 10),
        st.integers(1, 5),
    )
    @settings(max_examples=150)
    def test_matches_naive_oracle(self, lengths, window, step):
        if len(lengths) < window:
            with pytest.raises(ValidationError):
                analytics.rolling_utterance_stats(lengths, window, step)
            return
        stats = analytics.rolling_utterance_stats(lengths, window, step)
        starts = list(range(0, len(lengths) - window + 1, step))
        assert len(stats.means) == len(starts)
        for mean, std, start in zip(stats.means, stats.stds, starts):
            chunk = lengths[start : start + window]
            naive_mean = sum(chunk) / window
            naive_std = math.sqrt(sum((x - naive_mean) ** 2 for x in chunk) / window)
            assert mean == pytest.approx(naive_mean, abs=1e-9)
            assert std == pytest.approx(naive_std, abs=1e-9)


def _vocab_for(words):
    stream = oc.TokenStream(list(words), [(0, len(words))])
    return oc.build_vocabulary(stream, max_types=len(set(words)) + 1)


class TestLocationProfiles:
    def test_single_occurrence_at_final_position(self):
        words = ["a"] * 9 + ["b"]
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 10)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        assert profiles["b"].mean_location == pytest.approx(0.9)
        assert profiles["b"].frequency == 1

    def test_symmetric_occurrences(self):
        words = ["b"] + ["a"] * 8 + ["b"]
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 10)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        assert profiles["b"].mean_location == pytest.approx((0 + 9) / 2 / 10)

    def test_oov_not_profiled(self):
        vocab = _vocab_for(["a", "a", "b"])
        ids = np.array([vocab.oov_id, vocab.word_to_id["a"]], dtype=np.uint32)
        profiles = analytics.location_profiles(ids, vocab)
        assert oc.OOV_SYMBOL not in profiles
        assert set(profiles) == {"a"}

    def test_locations_in_unit_interval(self):
        rng = np.random.default_rng(8)
        words = [f"w{i}" for i in rng.integers(0, 12, 300)]
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 300)]), vocab).ids
        for p in analytics.location_profiles(ids, vocab).values():
            assert 0.0 <= p.mean_location <= 1.0
            assert p.frequency >= 1


class TestHalfSplitCurves:
    def test_disjoint_supports(self):
        words = ["early"] * 5 + ["pad"] * 5 + ["late"] * 5
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 15)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        curves = analytics.half_split_curves(
            profiles, {"early": "noun", "late": "noun"}, ids, vocab, n_bins=3
        )
        assert len(curves) == 1
        assert curves[0].first_half_counts == [5, 0, 0]
        assert curves[0].second_half_counts == [0, 0, 5]

    def test_counts_sum_to_category_frequency(self):
        rng = np.random.default_rng(1)
        words = [f"w{i}" for i in rng.integers(0, 10, 400)]
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 400)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        lexicon = {f"w{i}": "noun" if i < 6 else "verb" for i in range(10)}
        for curve in analytics.half_split_curves(profiles, lexicon, ids, vocab, n_bins=8):
            total = sum(curve.first_half_counts) + sum(curve.second_half_counts)
            expected = sum(
                profiles[w].frequency
                for w, cat in lexicon.items()
                if cat == curve.category and w in profiles
            )
            assert total == expected

    def test_sparse_category_skipped_with_warning(self, caplog):
        words = ["a"] * 4 + ["b"] * 4
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 8)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        with caplog.at_level("WARNING"):
            curves = analytics.half_split_curves(
                profiles, {"a": "noun", "b": "verb", "zz": "verb"}, ids, vocab, n_bins=2
            )
        assert curves == []
        assert any("fewer than 2" in r.message for r in caplog.records)

    def test_odd_count_puts_extra_word_in_first_half(self):
        # three words, locations strictly increasing; the two earliest form the first half
        words = ["x"] * 4 + ["y"] * 4 + ["z"] * 4
        vocab = _vocab_for(words)
        ids = oc.encode(oc.TokenStream(words, [(0, 12)]), vocab).ids
        profiles = analytics.location_profiles(ids, vocab)
        lexicon = {"x": "noun", "y": "noun", "z": "noun"}
        (curve,) = analytics.half_split_curves(profiles, lexicon, ids, vocab, n_bins=3)
        assert curve.first_half_counts == [4, 4, 0]  # x and y
        assert curve.second_half_counts == [0, 0, 4]  # z

    def test_empty_lexicon_fails(self):
        with pytest.raises(ValidationError):
            analytics.half_split_curves({}, {}, np.zeros(4, np.uint32), None, 2)


class TestCsvWriters:
    def test_headers_and_row_counts(self, tmp_path):
        curve = analytics.NoveltyCurve(n=2, bin_size=5, cumulative_novel=[1, 3, 4])
        analytics.write_novelty_csv([curve], tmp_path / "n.csv")
        rows = list(csv.reader(open(tmp_path / "n.csv")))
        assert rows[0] == ["n", "bin_size", "bin_index", "cumulative_novel"]
        assert len(rows) == 4

        analytics.write_entropy_csv(analytics.EntropySeries([1.0, 2.0]), tmp_path / "e.csv")
        rows = list(csv.reader(open(tmp_path / "e.csv")))
        assert rows[0] == ["partition_index", "entropy_bits"]
        assert len(rows) == 3

        stats = analytics.RollingStats(2, 1, [1.5], [0.5])
        analytics.write_rolling_csv(stats, tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert rows[0] == ["window_index", "start_utterance", "mean_length", "std_length"]

        profiles = {"a": analytics.LocationProfile("a", 3, 0.25)}
        analytics.write_location_csv(profiles, tmp_path / "l.csv")
        rows = list(csv.reader(open(tmp_path / "l.csv")))
        assert rows[0] == ["word", "frequency", "mean_location"]

        half = analytics.HalfSplitCurves("noun", [1, 0], [0, 2])
        analytics.write_half_split_csv([half], tmp_path / "h.csv")
        rows = list(csv.reader(open(tmp_path / "h.csv")))
        assert rows[0] == ["category", "bin_index", "first_half_count", "second_half_count"]
        assert len(rows) == 3
