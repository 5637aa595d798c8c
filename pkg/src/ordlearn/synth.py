"""Synthetic age-tagged corpora for smoke tests and demos.

Generates transcripts whose word distribution is Zipf-like over pseudo-word
types, with strictly increasing target-child ages, plus matching probe and
category-lexicon files. Everything is seeded and deterministic.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .corpus import Transcript


def synthetic_transcripts(
    n_transcripts: int = 25,
    utterances_per_transcript: int = 20,
    words_per_utterance: int = 7,
    n_types: int = 90,
    seed: int = 0,
    base_age_days: int = 180,
    age_step_days: int = 14,
) -> list[Transcript]:
    """Each utterance holds `words_per_utterance` sampled words and ends with
    a period attached to the last word, so punctuation variants differ."""
    rng = np.random.default_rng(seed)
    words = [f"w{i:03d}" for i in range(n_types)]
    weights = 1.0 / np.arange(1, n_types + 1)
    weights /= weights.sum()
    transcripts = []
    for i in range(n_transcripts):
        utterances = []
        for _ in range(utterances_per_transcript):
            picks = rng.choice(n_types, size=words_per_utterance, p=weights)
            text = " ".join(words[int(k)] for k in picks) + "."
            utterances.append(text)
        transcripts.append(
            Transcript(
                transcript_id=f"t{i:04d}",
                age_days=base_age_days + i * age_step_days,
                utterances=utterances,
            )
        )
    return transcripts


def write_transcripts_jsonl(transcripts: list[Transcript], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in transcripts:
            for utterance in t.utterances:
                fh.write(
                    json.dumps(
                        {
                            "transcript_id": t.transcript_id,
                            "age_days": t.age_days,
                            "utterance": utterance,
                        }
                    )
                    + "\n"
                )


def synthetic_probes(
    n_probes: int = 12, n_categories: int = 4, first_rank: int = 3
) -> list[tuple[str, str]]:
    """Probe words drawn from frequent ranks so they stay in-vocabulary;
    categories are assigned round-robin."""
    if n_probes < 2 * n_categories:
        raise ValueError("need at least two probes per category")
    return [
        (f"w{first_rank + i:03d}", f"cat{i % n_categories}") for i in range(n_probes)
    ]


def write_probe_csv(probes: list[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "category"])
        writer.writerows(probes)


def synthetic_lexicon(n_words: int = 30, first_rank: int = 1) -> dict[str, str]:
    """A word -> grammatical-category map over frequent ranks, for the
    half-split frequency analysis."""
    categories = ("noun", "verb", "adjective")
    return {
        f"w{first_rank + i:03d}": categories[i % len(categories)] for i in range(n_words)
    }


def write_lexicon_csv(lexicon: dict[str, str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "category"])
        for word in sorted(lexicon):
            writer.writerow([word, lexicon[word]])
