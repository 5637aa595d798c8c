"""Transcript ingestion, tokenization, and deterministic corpus preparation.

The pipeline turns age-tagged transcripts into an encoded token stream split
into equal-size contiguous partitions, which are visited either in
chronological (age) order or in a seeded random order. Two punctuation
variants exist: utterance-boundary markers (".", "?", "!") kept as ordinary
tokens, or removed entirely. All randomness is explicit and seeded, so
preparing the same input twice yields byte-identical results.

Binary corpus file layout (all integers little-endian):

    offset  size  field
    0       4     magic "ORDL"
    4       2     format version (currently 1)
    6       1     ordering (0 = chronological, 1 = shuffled)
    7       1     punctuation (0 = retained, 1 = removed)
    8       8     shuffle seed (u64; zero when chronological)
    16      8     token count N (u64)
    24      8     utterance span count S (u64)
    32      4     partition count P (u32)
    36      4     vocabulary size (u32; zero when no vocabulary attached)
    40      --    N token ids (u32), then S spans (start u32, end u32),
                  then P partitions (start u32, end u32), then the partition
                  visit order (P x u32)

The vocabulary is stored separately as a text file, one word per line in id
order (the final line is the out-of-vocabulary symbol), preceded by a single
"#oov_fraction=..." metadata line.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

CORPUS_MAGIC = b"ORDL"
CORPUS_FORMAT_VERSION = 1

BOUNDARY_TOKENS = (".", "?", "!")
CLITICS = ("n't", "'s", "'re", "'ll", "'ve", "'m", "'d")
OOV_SYMBOL = "<oov>"

DEFAULT_PARTITIONS = 256
DEFAULT_MAX_TYPES = 4096


class PunctuationMode(Enum):
    RETAINED = "retained"
    REMOVED = "removed"


@dataclass(frozen=True)
class Chronological:
    """Partitions are visited in age order."""


@dataclass(frozen=True)
class Shuffled:
    """Partition visit order is a seeded Fisher-Yates permutation."""

    seed: int

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValidationError(f"shuffle seed must be an integer in [0, 2**64), got {self.seed!r}")


OrderingMode = Chronological | Shuffled


def ordering_name(mode: OrderingMode) -> str:
    return "chronological" if isinstance(mode, Chronological) else "shuffled"


@dataclass
class Transcript:
    transcript_id: str
    age_days: int
    utterances: list[str]


def load_transcripts_jsonl(path: str | Path) -> list[Transcript]:
    """Read one utterance per line: {"transcript_id", "age_days", "utterance"}.

    Utterance order within a transcript is file order; rows of the same
    transcript need not be adjacent. A missing or invalid age is a hard
    error: age-less material must be excluded upstream.
    """
    by_id: dict[str, Transcript] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise ValidationError(f"{path}:{lineno}: expected a JSON object")
            try:
                tid = row["transcript_id"]
                age = row["age_days"]
                utterance = row["utterance"]
            except KeyError as exc:
                raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
            if not isinstance(age, int) or isinstance(age, bool) or age < 0:
                raise ValidationError(
                    f"{path}:{lineno}: age_days must be a nonnegative integer, got {age!r}"
                )
            if not isinstance(tid, str) or not isinstance(utterance, str):
                raise ValidationError(
                    f"{path}:{lineno}: transcript_id and utterance must be strings"
                )
            existing = by_id.get(tid)
            if existing is None:
                by_id[tid] = Transcript(tid, age, [utterance])
            elif existing.age_days != age:
                raise ValidationError(
                    f"{path}:{lineno}: transcript {tid!r} has conflicting ages "
                    f"{existing.age_days} and {age}"
                )
            else:
                existing.utterances.append(utterance)
    return list(by_id.values())


def order_transcripts(transcripts: list[Transcript]) -> list[Transcript]:
    """Ascending target-child age; ties broken by transcript id."""
    for t in transcripts:
        if not isinstance(t.age_days, int) or isinstance(t.age_days, bool) or t.age_days < 0:
            raise ValidationError(
                f"transcript {t.transcript_id!r} lacks a valid nonnegative age"
            )
    return sorted(transcripts, key=lambda t: (t.age_days, t.transcript_id))


def tokenize_utterance(text: str, mode: PunctuationMode) -> list[str]:
    """Lowercase, split on whitespace, split clitics, isolate boundary marks.

    Sentence-final punctuation (".", "?", "!") becomes a standalone token
    when retained and disappears when removed. Every other punctuation
    character is deleted in place; apostrophes survive so clitics can be
    split off, and apostrophe forms outside the clitic set (e.g. "o'clock")
    stay attached.
    """
    tokens: list[str] = []
    for chunk in text.lower().replace("’", "'").split():
        for piece in _split_boundary_chars(chunk):
            if piece in BOUNDARY_TOKENS:
                if mode is PunctuationMode.RETAINED:
                    tokens.append(piece)
            else:
                tokens.extend(_split_clitics(piece))
    return tokens


def _split_boundary_chars(chunk: str) -> list[str]:
    pieces: list[str] = []
    word: list[str] = []
    for ch in chunk:
        if ch.isalnum() or ch == "'":
            word.append(ch)
        elif ch in BOUNDARY_TOKENS:
            if word:
                pieces.append("".join(word))
                word.clear()
            pieces.append(ch)
        # any other punctuation character is dropped in place
    if word:
        pieces.append("".join(word))
    return pieces


def _split_clitics(word: str) -> list[str]:
    clitics: list[str] = []
    while True:
        for suffix in CLITICS:
            if word.endswith(suffix) and len(word) > len(suffix):
                clitics.append(suffix)
                word = word[: -len(suffix)]
                break
        else:
            break
    return [word, *reversed(clitics)]


@dataclass
class TokenStream:
    """A flat token list plus (start, end) spans, one span per utterance.

    Spans tile the token list: consecutive, no gaps, no overlaps. An
    utterance that tokenizes to nothing (e.g. punctuation-only under the
    removed mode) keeps a zero-length span.
    """

    tokens: list[str]
    utterance_spans: list[tuple[int, int]]

    def __post_init__(self):
        end = 0
        for s, e in self.utterance_spans:
            if s != end or e < s:
                raise ValidationError("utterance spans must tile the token list")
            end = e
        if end != len(self.tokens):
            raise ValidationError("utterance spans must cover every token")


def build_token_stream(transcripts: list[Transcript], mode: PunctuationMode) -> TokenStream:
    """Concatenate transcripts (in the given order) into one token stream."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for t in transcripts:
        for utterance in t.utterances:
            toks = tokenize_utterance(utterance, mode)
            start = len(tokens)
            tokens.extend(toks)
            spans.append((start, len(tokens)))
    return TokenStream(tokens, spans)


@dataclass
class Vocabulary:
    """Dense word ids for the most frequent types, plus one shared OOV id.

    In-vocabulary types are exactly the (size - 1) most frequent types of
    the stream the vocabulary was built from, frequency ties broken
    lexicographically; the OOV id is always the last id.
    """

    word_to_id: dict[str, int]
    id_to_word: list[str]
    oov_id: int
    oov_fraction: float

    @property
    def size(self) -> int:
        return len(self.id_to_word)

    def id_of(self, word: str) -> int:
        return self.word_to_id.get(word, self.oov_id)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#oov_fraction={self.oov_fraction!r}\n")
            for word in self.id_to_word:
                fh.write(word + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        oov_fraction = 0.0
        words: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#oov_fraction="):
                    oov_fraction = float(line.split("=", 1)[1])
                else:
                    words.append(line)
        if len(words) < 2:
            raise ValidationError(f"{path}: vocabulary needs at least one word plus the OOV symbol")
        return cls(
            word_to_id={w: i for i, w in enumerate(words[:-1])},
            id_to_word=words,
            oov_id=len(words) - 1,
            oov_fraction=oov_fraction,
        )


def build_vocabulary(stream: TokenStream, max_types: int = DEFAULT_MAX_TYPES) -> Vocabulary:
    """Keep the max_types - 1 most frequent types; everything else is OOV."""
    if max_types < 2:
        raise ValidationError(f"max_types must be >= 2, got {max_types}")
    counts = Counter(stream.tokens)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [w for w, _ in ranked[: max_types - 1]]
    total = len(stream.tokens)
    in_vocab = sum(counts[w] for w in kept)
    oov_fraction = 0.0 if total == 0 else (total - in_vocab) / total
    log.info(
        "vocabulary: %d in-vocabulary types (+1 oov), oov token fraction %.4f",
        len(kept), oov_fraction,
    )
    return Vocabulary(
        word_to_id={w: i for i, w in enumerate(kept)},
        id_to_word=kept + [OOV_SYMBOL],
        oov_id=len(kept),
        oov_fraction=oov_fraction,
    )


@dataclass
class EncodedStream:
    ids: np.ndarray  # u32, aligned with the source token list
    utterance_spans: list[tuple[int, int]]


def encode(stream: TokenStream, vocab: Vocabulary) -> EncodedStream:
    """Map every token to its id (or the OOV id); spans carry over unchanged."""
    ids = np.fromiter(
        (vocab.id_of(t) for t in stream.tokens), dtype=np.uint32, count=len(stream.tokens)
    )
    return EncodedStream(ids, list(stream.utterance_spans))


def decode(ids, vocab: Vocabulary) -> list[str]:
    return [vocab.id_to_word[int(i)] for i in ids]


def _fisher_yates(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    order = np.arange(n, dtype=np.uint32)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


_HEADER = struct.Struct("<4sHBBQQQLL")


@dataclass
class PreparedCorpus:
    """An encoded stream cut into equal partitions with a visit order.

    `ids` stays in age order and is truncated to n_partitions * floor(T /
    n_partitions) tokens; `partition_order` carries the chronological or
    shuffled visit order, and `training_ids` concatenates the partitions in
    that order (the stream the model actually sees). Utterance spans index
    into `ids` and are clipped at the truncation point.
    """

    ids: np.ndarray
    utterance_spans: list[tuple[int, int]]
    partitions: list[tuple[int, int]]
    n_partitions: int
    partition_order: np.ndarray
    ordering_mode: OrderingMode
    punctuation_mode: PunctuationMode
    vocab: Vocabulary | None = None

    @property
    def partition_length(self) -> int:
        return len(self.ids) // self.n_partitions

    @property
    def training_ids(self) -> np.ndarray:
        if isinstance(self.ordering_mode, Chronological):
            return self.ids
        return np.concatenate(
            [self.ids[s:e] for s, e in (self.partitions[int(p)] for p in self.partition_order)]
        )

    def utterance_lengths(self, training_order: bool = False) -> list[int]:
        """Token count per utterance, in age order or partition-visit order.

        In visit order, an utterance belongs to the partition containing its
        first token.
        """
        if not training_order or isinstance(self.ordering_mode, Chronological):
            return [e - s for s, e in self.utterance_spans]
        by_partition: list[list[int]] = [[] for _ in range(self.n_partitions)]
        length = self.partition_length
        for s, e in self.utterance_spans:
            by_partition[s // length].append(e - s)
        return [n for p in self.partition_order for n in by_partition[int(p)]]

    def save(self, path: str | Path) -> None:
        mode_code = 0 if isinstance(self.ordering_mode, Chronological) else 1
        seed = self.ordering_mode.seed if isinstance(self.ordering_mode, Shuffled) else 0
        punct_code = 0 if self.punctuation_mode is PunctuationMode.RETAINED else 1
        spans = np.asarray(self.utterance_spans, dtype="<u4").reshape(-1, 2)
        partitions = np.asarray(self.partitions, dtype="<u4").reshape(-1, 2)
        with open(path, "wb") as fh:
            fh.write(
                _HEADER.pack(
                    CORPUS_MAGIC,
                    CORPUS_FORMAT_VERSION,
                    mode_code,
                    punct_code,
                    seed,
                    len(self.ids),
                    len(self.utterance_spans),
                    self.n_partitions,
                    0 if self.vocab is None else self.vocab.size,
                )
            )
            fh.write(self.ids.astype("<u4").tobytes())
            fh.write(spans.tobytes())
            fh.write(partitions.tobytes())
            fh.write(self.partition_order.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary | None = None) -> "PreparedCorpus":
        with open(path, "rb") as fh:
            header = fh.read(_HEADER.size)
            if len(header) < _HEADER.size:
                raise ValidationError(f"{path}: truncated corpus header")
            magic, version, mode_code, punct_code, seed, n_ids, n_spans, n_parts, vocab_size = (
                _HEADER.unpack(header)
            )
            if magic != CORPUS_MAGIC:
                raise ValidationError(f"{path}: not a corpus file (bad magic {magic!r})")
            if version != CORPUS_FORMAT_VERSION:
                raise ValidationError(f"{path}: unsupported corpus format version {version}")
            body = fh.read()
        expected = 4 * n_ids + 8 * n_spans + 8 * n_parts + 4 * n_parts
        if len(body) != expected:
            raise ValidationError(
                f"{path}: corpus body holds {len(body)} bytes, expected {expected}"
            )
        ids = np.frombuffer(body, dtype="<u4", count=n_ids).astype(np.uint32)
        offset = 4 * n_ids
        spans = np.frombuffer(body, dtype="<u4", count=2 * n_spans, offset=offset).reshape(-1, 2)
        offset += 8 * n_spans
        parts = np.frombuffer(body, dtype="<u4", count=2 * n_parts, offset=offset).reshape(-1, 2)
        offset += 8 * n_parts
        order = np.frombuffer(body, dtype="<u4", count=n_parts, offset=offset).astype(np.uint32)
        if vocab is not None and vocab_size and vocab.size != vocab_size:
            raise ValidationError(
                f"{path}: corpus was built with a {vocab_size}-entry vocabulary, "
                f"got one of size {vocab.size}"
            )
        mode: OrderingMode = Chronological() if mode_code == 0 else Shuffled(seed)
        punct = PunctuationMode.RETAINED if punct_code == 0 else PunctuationMode.REMOVED
        return cls(
            ids=ids,
            utterance_spans=[(int(s), int(e)) for s, e in spans],
            partitions=[(int(s), int(e)) for s, e in parts],
            n_partitions=n_parts,
            partition_order=order,
            ordering_mode=mode,
            punctuation_mode=punct,
            vocab=vocab,
        )


def partition_stream(
    ids,
    n_partitions: int,
    mode: OrderingMode,
    *,
    utterance_spans: list[tuple[int, int]] | None = None,
    punctuation_mode: PunctuationMode = PunctuationMode.RETAINED,
    vocab: Vocabulary | None = None,
) -> PreparedCorpus:
    """Split an encoded stream into n_partitions equal contiguous blocks.

    The tail remainder that does not fill a partition is dropped, with a
    warning. Chronological preparation visits partitions in place; shuffled
    preparation visits them in a seeded Fisher-Yates permutation. Token
    order inside a partition is never changed.
    """
    ids = np.ascontiguousarray(ids, dtype=np.uint32)
    if n_partitions < 1:
        raise ValidationError(f"n_partitions must be >= 1, got {n_partitions}")
    if len(ids) < n_partitions:
        raise ValidationError(
            f"stream of {len(ids)} tokens is shorter than {n_partitions} partitions"
        )
    part_len = len(ids) // n_partitions
    kept = part_len * n_partitions
    if kept < len(ids):
        log.warning(
            "dropping %d tail tokens so all %d partitions hold exactly %d tokens",
            len(ids) - kept, n_partitions, part_len,
        )
    spans: list[tuple[int, int]] = []
    for s, e in utterance_spans or []:
        if s >= kept:
            break  # spans are ordered; everything beyond is past the cut
        spans.append((int(s), min(int(e), kept)))
    if isinstance(mode, Shuffled):
        order = _fisher_yates(n_partitions, mode.seed)
    else:
        order = np.arange(n_partitions, dtype=np.uint32)
    return PreparedCorpus(
        ids=ids[:kept].copy(),
        utterance_spans=spans,
        partitions=[(i * part_len, (i + 1) * part_len) for i in range(n_partitions)],
        n_partitions=n_partitions,
        partition_order=order,
        ordering_mode=mode,
        punctuation_mode=punctuation_mode,
        vocab=vocab,
    )


def prepare_corpus(
    transcripts: list[Transcript],
    ordering: OrderingMode,
    punctuation: PunctuationMode,
    n_partitions: int = DEFAULT_PARTITIONS,
    max_types: int = DEFAULT_MAX_TYPES,
) -> PreparedCorpus:
    """Order transcripts by age, tokenize, build the vocabulary, encode,
    and partition. The vocabulary is built per punctuation variant, over the
    full stream before truncation."""
    ordered = order_transcripts(transcripts)
    stream = build_token_stream(ordered, punctuation)
    vocab = build_vocabulary(stream, max_types)
    encoded = encode(stream, vocab)
    return partition_stream(
        encoded.ids,
        n_partitions,
        ordering,
        utterance_spans=encoded.utterance_spans,
        punctuation_mode=punctuation,
        vocab=vocab,
    )
