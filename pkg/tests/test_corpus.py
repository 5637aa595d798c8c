import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordlearn import corpus as oc
from ordlearn.errors import ValidationError

RET = oc.PunctuationMode.RETAINED
REM = oc.PunctuationMode.REMOVED


class TestTokenizeUtterance:
    def test_clitic_and_boundary(self):
        assert oc.tokenize_utterance("Where's the ball?", RET) == ["where", "'s", "the", "ball", "?"]

    def test_boundary_removed(self):
        assert oc.tokenize_utterance("Where's the ball?", REM) == ["where", "'s", "the", "ball"]

    def test_nt_clitic(self):
        assert oc.tokenize_utterance("Don't!", RET) == ["do", "n't", "!"]

    def test_stacked_clitics(self):
        assert oc.tokenize_utterance("shouldn't've", RET) == ["should", "n't", "'ve"]

    def test_apostrophe_form_outside_clitic_set_stays_attached(self):
        assert oc.tokenize_utterance("o'clock", RET) == ["o'clock"]

    def test_internal_punctuation_stripped_in_both_modes(self):
        assert oc.tokenize_utterance("well, yes", RET) == ["well", "yes"]
        assert oc.tokenize_utterance("well, yes", REM) == ["well", "yes"]

    def test_empty_text(self):
        assert oc.tokenize_utterance("", RET) == []
        assert oc.tokenize_utterance("   ", REM) == []

    def test_punctuation_only_utterance(self):
        assert oc.tokenize_utterance("?", RET) == ["?"]
        assert oc.tokenize_utterance("?", REM) == []

    def test_attached_boundary_marks_split_off(self):
        assert oc.tokenize_utterance("ball?!", RET) == ["ball", "?", "!"]

    def test_lowercasing_and_curly_apostrophe(self):
        assert oc.tokenize_utterance("DON’T", RET) == ["do", "n't"]

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_removed_equals_retained_minus_boundaries(self, text):
        retained = oc.tokenize_utterance(text, RET)
        removed = oc.tokenize_utterance(text, REM)
        assert removed == [t for t in retained if t not in oc.BOUNDARY_TOKENS]

    @given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=80))
    @settings(max_examples=200)
    def test_tokens_lowercase_and_clean(self, text):
        for token in oc.tokenize_utterance(text, RET):
            assert token == token.lower()
            if token not in oc.BOUNDARY_TOKENS:
                assert all(ch.isalnum() or ch == "'" for ch in token)


class TestOrderTranscripts:
    def test_sorts_by_age(self):
        ts = [oc.Transcript("B", 400, ["x"]), oc.Transcript("A", 30, ["y"])]
        assert [t.transcript_id for t in oc.order_transcripts(ts)] == ["A", "B"]

    def test_tie_broken_by_id(self):
        ts = [oc.Transcript("B", 30, ["x"]), oc.Transcript("A", 30, ["y"])]
        assert [t.transcript_id for t in oc.order_transcripts(ts)] == ["A", "B"]

    def test_empty(self):
        assert oc.order_transcripts([]) == []

    def test_missing_age_rejected(self):
        with pytest.raises(ValidationError):
            oc.order_transcripts([oc.Transcript("A", None, ["x"])])
        with pytest.raises(ValidationError):
            oc.order_transcripts([oc.Transcript("A", -1, ["x"])])

    @given(st.lists(st.tuples(st.integers(0, 5000), st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=4)), max_size=30))
    def test_order_is_age_then_id(self, pairs):
        ts = [oc.Transcript(tid, age, []) for age, tid in pairs]
        ordered = oc.order_transcripts(ts)
        keys = [(t.age_days, t.transcript_id) for t in ordered]
        assert keys == sorted(keys)


class TestJsonlIngestion:
    def _write(self, tmp_path, rows):
        path = tmp_path / "in.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        return path

    def test_groups_by_transcript_preserving_order(self, tmp_path):
        rows = [
            {"transcript_id": "a", "age_days": 100, "utterance": "one"},
            {"transcript_id": "b", "age_days": 50, "utterance": "two"},
            {"transcript_id": "a", "age_days": 100, "utterance": "three"},
        ]
        ts = {t.transcript_id: t for t in oc.load_transcripts_jsonl(self._write(tmp_path, rows))}
        assert ts["a"].utterances == ["one", "three"]
        assert ts["b"].age_days == 50

    def test_missing_age_is_an_error(self, tmp_path):
        path = self._write(tmp_path, [{"transcript_id": "a", "utterance": "x"}])
        with pytest.raises(ValidationError, match="age_days"):
            oc.load_transcripts_jsonl(path)

    def test_null_age_is_an_error(self, tmp_path):
        path = self._write(tmp_path, [{"transcript_id": "a", "age_days": None, "utterance": "x"}])
        with pytest.raises(ValidationError):
            oc.load_transcripts_jsonl(path)

    def test_conflicting_ages_rejected(self, tmp_path):
        rows = [
            {"transcript_id": "a", "age_days": 10, "utterance": "x"},
            {"transcript_id": "a", "age_days": 11, "utterance": "y"},
        ]
        with pytest.raises(ValidationError, match="conflicting"):
            oc.load_transcripts_jsonl(self._write(tmp_path, rows))

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"transcript_id": "a", "age_days": 1, "utterance": "x"}\nnot json\n')
        with pytest.raises(ValidationError, match=":2"):
            oc.load_transcripts_jsonl(path)


class TestVocabulary:
    def _stream(self, words):
        return oc.TokenStream(list(words), [(0, len(words))] if words else [])

    def test_all_types_fit(self):
        vocab = oc.build_vocabulary(self._stream(["a", "a", "b"]), max_types=3)
        assert set(vocab.word_to_id) == {"a", "b"}
        assert vocab.oov_fraction == 0.0
        assert vocab.size == 3

    def test_frequency_tie_broken_lexicographically(self):
        vocab = oc.build_vocabulary(self._stream(["a", "a", "b", "c"]), max_types=3)
        assert set(vocab.word_to_id) == {"a", "b"}
        assert vocab.oov_fraction == 0.25

    def test_ids_dense_and_oov_last(self):
        vocab = oc.build_vocabulary(self._stream(["b", "a", "a", "c", "c", "c"]), max_types=3)
        assert sorted(vocab.word_to_id.values()) == list(range(vocab.size - 1))
        assert vocab.oov_id == vocab.size - 1
        assert vocab.id_to_word[vocab.oov_id] == oc.OOV_SYMBOL
        assert vocab.size == len(vocab.word_to_id) + 1

    def test_max_types_too_small(self):
        with pytest.raises(ValidationError):
            oc.build_vocabulary(self._stream(["a"]), max_types=1)

    @given(
        st.lists(st.sampled_from(["a", "b", "c", "d", "e", "f"]), min_size=1, max_size=60),
        st.integers(2, 8),
    )
    def test_keeps_most_frequent_types(self, words, max_types):
        from collections import Counter

        vocab = oc.build_vocabulary(self._stream(words), max_types)
        ranked = sorted(Counter(words).items(), key=lambda kv: (-kv[1], kv[0]))
        expected = [w for w, _ in ranked[: max_types - 1]]
        assert vocab.id_to_word[:-1] == expected

    def test_save_load_roundtrip(self, tmp_path):
        vocab = oc.build_vocabulary(self._stream(["a", "a", "b", "c"]), max_types=3)
        vocab.save(tmp_path / "vocab.txt")
        loaded = oc.Vocabulary.load(tmp_path / "vocab.txt")
        assert loaded.word_to_id == vocab.word_to_id
        assert loaded.id_to_word == vocab.id_to_word
        assert loaded.oov_id == vocab.oov_id
        assert loaded.oov_fraction == vocab.oov_fraction


class TestEncodeDecode:
    def test_oov_mapping(self):
        vocab = oc.build_vocabulary(oc.TokenStream(["a", "a"], [(0, 2)]), max_types=2)
        encoded = oc.encode(oc.TokenStream(["a", "zz"], [(0, 2)]), vocab)
        assert encoded.ids.tolist() == [vocab.word_to_id["a"], vocab.oov_id]

    def test_empty(self):
        vocab = oc.build_vocabulary(oc.TokenStream(["a"], [(0, 1)]), max_types=2)
        assert oc.encode(oc.TokenStream([], []), vocab).ids.tolist() == []

    @given(st.lists(st.sampled_from(["a", "b", "c", "zz", "qq"]), max_size=40))
    def test_roundtrip_replaces_oov(self, words):
        base = oc.TokenStream(["a", "a", "b", "b", "c"], [(0, 5)])
        vocab = oc.build_vocabulary(base, max_types=4)
        stream = oc.TokenStream(words, [(0, len(words))] if words else [])
        decoded = oc.decode(oc.encode(stream, vocab).ids, vocab)
        expected = [w if w in vocab.word_to_id else oc.OOV_SYMBOL for w in words]
        assert decoded == expected

    def test_spans_preserved(self):
        vocab = oc.build_vocabulary(oc.TokenStream(["a"], [(0, 1)]), max_types=2)
        stream = oc.TokenStream(["a", "a", "a"], [(0, 2), (2, 3)])
        assert oc.encode(stream, vocab).utterance_spans == [(0, 2), (2, 3)]


class TestTokenStream:
    def test_spans_must_tile(self):
        with pytest.raises(ValidationError):
            oc.TokenStream(["a", "b"], [(0, 1)])
        with pytest.raises(ValidationError):
            oc.TokenStream(["a", "b"], [(0, 1), (0, 2)])

    def test_zero_length_spans_allowed(self):
        stream = oc.TokenStream(["a"], [(0, 0), (0, 1), (1, 1)])
        assert len(stream.utterance_spans) == 3

    def test_build_token_stream_records_empty_utterances(self):
        ts = [oc.Transcript("a", 1, ["?", "hi there."])]
        stream = oc.build_token_stream(ts, REM)
        assert stream.tokens == ["hi", "there"]
        assert stream.utterance_spans == [(0, 0), (0, 2)]


class TestPartitionStream:
    def test_exact_division(self):
        prepared = oc.partition_stream(np.arange(1000, dtype=np.uint32), 4, oc.Chronological())
        assert prepared.partition_length == 250
        assert prepared.partitions == [(0, 250), (250, 500), (500, 750), (750, 1000)]

    def test_remainder_dropped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            prepared = oc.partition_stream(np.arange(1003, dtype=np.uint32), 4, oc.Chronological())
        assert len(prepared.ids) == 1000
        assert any("dropping 3 tail tokens" in r.message for r in caplog.records)

    def test_too_short_stream_fails(self):
        with pytest.raises(ValidationError):
            oc.partition_stream(np.arange(3, dtype=np.uint32), 4, oc.Chronological())

    def test_chronological_identity_order(self):
        prepared = oc.partition_stream(np.arange(100, dtype=np.uint32), 5, oc.Chronological())
        assert prepared.partition_order.tolist() == [0, 1, 2, 3, 4]
        assert np.array_equal(prepared.training_ids, prepared.ids)

    def test_shuffled_is_seeded_permutation(self):
        ids = np.arange(256 * 4, dtype=np.uint32)
        a = oc.partition_stream(ids, 256, oc.Shuffled(7))
        b = oc.partition_stream(ids, 256, oc.Shuffled(7))
        c = oc.partition_stream(ids, 256, oc.Shuffled(8))
        assert np.array_equal(a.partition_order, b.partition_order)
        assert not np.array_equal(a.partition_order, c.partition_order)
        assert sorted(a.partition_order.tolist()) == list(range(256))

    def test_shuffle_preserves_partition_multiset(self):
        rng = np.random.default_rng(0)
        ids = rng.integers(0, 50, 730).astype(np.uint32)
        chron = oc.partition_stream(ids, 7, oc.Chronological())
        shuf = oc.partition_stream(ids, 7, oc.Shuffled(3))
        as_sets = lambda p: sorted(p.ids[s:e].tolist() for s, e in p.partitions)  # noqa: E731
        assert as_sets(chron) == as_sets(shuf)

    def test_training_ids_concatenates_in_visit_order(self):
        ids = np.arange(60, dtype=np.uint32)
        prepared = oc.partition_stream(ids, 6, oc.Shuffled(1))
        manual = np.concatenate(
            [ids[p * 10 : (p + 1) * 10] for p in prepared.partition_order]
        )
        assert np.array_equal(prepared.training_ids, manual)

    def test_spans_clipped_at_truncation(self):
        spans = [(0, 4), (4, 9), (9, 11)]
        prepared = oc.partition_stream(
            np.arange(11, dtype=np.uint32), 2, oc.Chronological(), utterance_spans=spans
        )
        assert prepared.utterance_spans == [(0, 4), (4, 9), (9, 10)]

    def test_token_count_is_partitions_times_floor(self):
        for total, n in ((1000, 4), (1003, 4), (257, 256), (5000, 7)):
            prepared = oc.partition_stream(np.zeros(total, dtype=np.uint32), n, oc.Chronological())
            assert len(prepared.ids) == n * (total // n)

    def test_bad_seed_rejected(self):
        with pytest.raises(ValidationError):
            oc.Shuffled(-1)
        with pytest.raises(ValidationError):
            oc.Shuffled(2**64)


class TestPreparedCorpusIO:
    def _prepared(self):
        rng = np.random.default_rng(5)
        ids = rng.integers(0, 30, 503).astype(np.uint32)
        spans = [(i * 10, min((i + 1) * 10, 503)) for i in range(51)]
        return oc.partition_stream(
            ids, 5, oc.Shuffled(42), utterance_spans=spans,
            punctuation_mode=REM,
        )

    def test_roundtrip(self, tmp_path):
        prepared = self._prepared()
        path = tmp_path / "c.ordl"
        prepared.save(path)
        loaded = oc.PreparedCorpus.load(path)
        assert np.array_equal(loaded.ids, prepared.ids)
        assert loaded.utterance_spans == prepared.utterance_spans
        assert loaded.partitions == prepared.partitions
        assert np.array_equal(loaded.partition_order, prepared.partition_order)
        assert loaded.ordering_mode == prepared.ordering_mode
        assert loaded.punctuation_mode == prepared.punctuation_mode

    def test_save_is_deterministic(self, tmp_path):
        prepared = self._prepared()
        prepared.save(tmp_path / "a.ordl")
        prepared.save(tmp_path / "b.ordl")
        assert (tmp_path / "a.ordl").read_bytes() == (tmp_path / "b.ordl").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ordl"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValidationError, match="magic"):
            oc.PreparedCorpus.load(path)

    def test_truncated(self, tmp_path):
        prepared = self._prepared()
        path = tmp_path / "c.ordl"
        prepared.save(path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 8])
        with pytest.raises(ValidationError):
            oc.PreparedCorpus.load(path)

    def test_vocab_size_mismatch(self, tmp_path):
        stream = oc.TokenStream(["a", "b", "a", "b", "a", "b"], [(0, 6)])
        vocab = oc.build_vocabulary(stream, max_types=3)
        prepared = oc.partition_stream(
            oc.encode(stream, vocab).ids, 2, oc.Chronological(), vocab=vocab
        )
        path = tmp_path / "c.ordl"
        prepared.save(path)
        other = oc.build_vocabulary(oc.TokenStream(["a"], [(0, 1)]), max_types=2)
        with pytest.raises(ValidationError, match="vocabulary"):
            oc.PreparedCorpus.load(path, other)


class TestPrepareCorpus:
    def test_age_order_is_nondecreasing_over_tokens(self):
        ts = [
            oc.Transcript("c", 300, ["w300 w300."]),
            oc.Transcript("a", 100, ["w100.", "w100 w100."]),
            oc.Transcript("b", 200, ["w200."]),
        ]
        prepared = oc.prepare_corpus(ts, oc.Chronological(), RET, n_partitions=1, max_types=16)
        ages = [
            int(word[1:]) for word in oc.decode(prepared.ids, prepared.vocab) if word.startswith("w")
        ]
        assert ages == sorted(ages)

    def test_removed_mode_has_no_boundary_tokens(self, toy_transcripts):
        prepared = oc.prepare_corpus(
            toy_transcripts, oc.Chronological(), REM, n_partitions=8, max_types=64
        )
        words = set(oc.decode(prepared.ids, prepared.vocab))
        assert not words & set(oc.BOUNDARY_TOKENS)

    def test_determinism(self, toy_transcripts):
        a = oc.prepare_corpus(toy_transcripts, oc.Shuffled(3), RET, 8, 64)
        b = oc.prepare_corpus(toy_transcripts, oc.Shuffled(3), RET, 8, 64)
        assert np.array_equal(a.ids, b.ids)
        assert np.array_equal(a.partition_order, b.partition_order)
        assert a.vocab.word_to_id == b.vocab.word_to_id

    def test_vocabulary_differs_by_punctuation_variant(self, toy_transcripts):
        kept = oc.prepare_corpus(toy_transcripts, oc.Chronological(), RET, 8, 64)
        removed = oc.prepare_corpus(toy_transcripts, oc.Chronological(), REM, 8, 64)
        assert "." in kept.vocab.word_to_id
        assert "." not in removed.vocab.word_to_id

    def test_utterance_lengths_training_order(self, toy_transcripts):
        prepared = oc.prepare_corpus(toy_transcripts, oc.Shuffled(9), RET, 8, 64)
        natural = prepared.utterance_lengths()
        visited = prepared.utterance_lengths(training_order=True)
        assert sorted(natural) == sorted(visited)
        assert len(natural) == len(prepared.utterance_spans)
