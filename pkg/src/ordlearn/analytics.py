"""Corpus complexity measures.

Covers novel n-gram growth, per-partition Shannon entropy, rolling
utterance-length statistics, and per-word stream-location profiles with
half-split frequency curves. Every measure is a pure function of its inputs
and serializes to CSV.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import PreparedCorpus, Vocabulary
from .errors import ValidationError

log = logging.getLogger(__name__)

DEFAULT_NOVELTY_BIN_SIZE = 10_000
DEFAULT_HALF_SPLIT_BINS = 20
DEFAULT_ROLLING_WINDOW = 1_000
DEFAULT_ROLLING_STEP = 100


@dataclass
class NoveltyCurve:
    n: int
    bin_size: int
    cumulative_novel: list[int]


def novel_ngram_curve(ids, n: int, bin_size: int = DEFAULT_NOVELTY_BIN_SIZE) -> NoveltyCurve:
    """Cumulative count of first-time n-grams, sampled at bin boundaries.

    Scanning left to right, an n-gram position is novel iff its id tuple has
    not occurred earlier in the stream; the last bin may be partial.
    """
    ids = np.ascontiguousarray(ids, dtype=np.uint32)
    if not 1 <= n <= len(ids):
        raise ValidationError(f"n must be in 1..{len(ids)}, got {n}")
    if bin_size < 1:
        raise ValidationError(f"bin_size must be >= 1, got {bin_size}")
    windows = sliding_window_view(ids, n)
    _, first = np.unique(windows, axis=0, return_index=True)
    first.sort()
    positions = len(windows)
    n_bins = -(-positions // bin_size)
    boundaries = np.minimum((np.arange(n_bins, dtype=np.int64) + 1) * bin_size, positions)
    curve = np.searchsorted(first, boundaries, side="left")
    return NoveltyCurve(n=n, bin_size=bin_size, cumulative_novel=[int(c) for c in curve])


def partition_entropy(ids) -> float:
    """Shannon entropy (bits) of the token-type distribution in a partition."""
    ids = np.asarray(ids)
    if len(ids) == 0:
        raise ValidationError("cannot compute the entropy of an empty partition")
    _, counts = np.unique(ids, return_counts=True)
    p = counts / len(ids)
    return float(-(p * np.log2(p)).sum()) + 0.0  # + 0.0 normalizes -0.0


@dataclass
class EntropySeries:
    per_partition_bits: list[float]


def entropy_series(corpus: PreparedCorpus) -> EntropySeries:
    """Entropy of each partition, in partition-visit order."""
    bits = []
    for pos in corpus.partition_order:
        s, e = corpus.partitions[int(pos)]
        bits.append(partition_entropy(corpus.ids[s:e]))
    return EntropySeries(bits)


@dataclass
class RollingStats:
    window_utterances: int
    step: int
    means: list[float]
    stds: list[float]


def rolling_utterance_stats(
    lengths, window: int = DEFAULT_ROLLING_WINDOW, step: int = DEFAULT_ROLLING_STEP
) -> RollingStats:
    """Population mean and standard deviation of utterance length per window.

    Windows advance by `step` until fewer than `window` utterances remain.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    if window < 2:
        raise ValidationError(f"window must be >= 2, got {window}")
    if step < 1:
        raise ValidationError(f"step must be >= 1, got {step}")
    if len(lengths) < window:
        raise ValidationError(f"need at least {window} utterances, got {len(lengths)}")
    views = sliding_window_view(lengths, window)[::step]
    return RollingStats(
        window_utterances=window,
        step=step,
        means=[float(m) for m in views.mean(axis=1)],
        stds=[float(s) for s in views.std(axis=1)],
    )


@dataclass
class LocationProfile:
    word: str
    frequency: int
    mean_location: float  # mean of (occurrence position / stream length), in [0, 1]


def location_profiles(ids, vocab: Vocabulary) -> dict[str, LocationProfile]:
    """Mean relative stream position of every attested in-vocabulary word."""
    ids = np.asarray(ids)
    if len(ids) == 0:
        raise ValidationError("cannot profile an empty stream")
    counts = np.bincount(ids, minlength=vocab.size)
    position_sums = np.bincount(
        ids, weights=np.arange(len(ids), dtype=np.float64), minlength=vocab.size
    )
    profiles: dict[str, LocationProfile] = {}
    for wid in range(vocab.size):
        if wid == vocab.oov_id or counts[wid] == 0:
            continue
        word = vocab.id_to_word[wid]
        profiles[word] = LocationProfile(
            word=word,
            frequency=int(counts[wid]),
            mean_location=float(position_sums[wid] / (counts[wid] * len(ids))),
        )
    return profiles


@dataclass
class HalfSplitCurves:
    category: str
    first_half_counts: list[int]
    second_half_counts: list[int]


def half_split_curves(
    profiles: dict[str, LocationProfile],
    lexicon: dict[str, str],
    ids,
    vocab: Vocabulary,
    n_bins: int = DEFAULT_HALF_SPLIT_BINS,
) -> list[HalfSplitCurves]:
    """Token counts per stream bin for early- vs late-dominant category words.

    Within each category the attested words are sorted by mean location and
    split at the median index (odd counts put the extra word in the first
    half). Categories with fewer than two attested words are skipped with a
    warning.
    """
    if not lexicon:
        raise ValidationError("lexicon is empty")
    if n_bins < 2:
        raise ValidationError(f"n_bins must be >= 2, got {n_bins}")
    ids = np.asarray(ids)
    by_category: dict[str, list[str]] = {}
    for word, category in lexicon.items():
        if word in profiles:
            by_category.setdefault(category, []).append(word)
    curves = []
    for category in sorted(by_category):
        words = by_category[category]
        if len(words) < 2:
            log.warning("category %r has fewer than 2 corpus-attested words; skipped", category)
            continue
        words.sort(key=lambda w: (profiles[w].mean_location, w))
        cut = (len(words) + 1) // 2
        curves.append(
            HalfSplitCurves(
                category=category,
                first_half_counts=_binned_counts(ids, [vocab.word_to_id[w] for w in words[:cut]], n_bins),
                second_half_counts=_binned_counts(ids, [vocab.word_to_id[w] for w in words[cut:]], n_bins),
            )
        )
    return curves


def _binned_counts(ids: np.ndarray, word_ids: list[int], n_bins: int) -> list[int]:
    positions = np.flatnonzero(np.isin(ids, np.asarray(word_ids, dtype=ids.dtype)))
    bins = (positions * n_bins) // len(ids)
    return [int(c) for c in np.bincount(bins, minlength=n_bins)]


def write_novelty_csv(curves: list[NoveltyCurve], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "bin_size", "bin_index", "cumulative_novel"])
        for curve in curves:
            for i, value in enumerate(curve.cumulative_novel):
                writer.writerow([curve.n, curve.bin_size, i, value])


def write_entropy_csv(series: EntropySeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["partition_index", "entropy_bits"])
        for i, bits in enumerate(series.per_partition_bits):
            writer.writerow([i, bits])


def write_rolling_csv(stats: RollingStats, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "start_utterance", "mean_length", "std_length"])
        for i, (mean, std) in enumerate(zip(stats.means, stats.stds)):
            writer.writerow([i, i * stats.step, mean, std])


def write_location_csv(profiles: dict[str, LocationProfile], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "frequency", "mean_location"])
        for word in sorted(profiles):
            p = profiles[word]
            writer.writerow([p.word, p.frequency, p.mean_location])


def write_half_split_csv(curves: list[HalfSplitCurves], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "bin_index", "first_half_count", "second_half_count"])
        for curve in curves:
            for i, (first, second) in enumerate(
                zip(curve.first_half_counts, curve.second_half_counts)
            ):
                writer.writerow([curve.category, i, first, second])
