"""Probe-word representations and balanced-accuracy category evaluation.

A probe's representation is the model's hidden state after the probe token,
derived under one of three conditions: ordered context (every window with the
probe in final position, averaged), shuffled context (same windows with the
context positions permuted by a seeded generator, probe kept last), or no
context (the probe alone from the reset state). Pairwise similarities feed a
signal-detection threshold sweep: same-category pairs above threshold are
hits, different-category pairs above threshold are false alarms, and the
balanced accuracy of a probe averages its sensitivity and specificity.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import PreparedCorpus, Vocabulary
from .errors import ProbeContextError, ValidationError
from .srn import SrnWeights, batched_hidden

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_STEP = 0.001
SIMILARITY_MAGIC = b"SIMS"
SIMILARITY_FORMAT_VERSION = 1


def default_threshold_grid(step: float = DEFAULT_THRESHOLD_STEP) -> np.ndarray:
    """Inclusive thresholds 0..1; the default step 0.001 gives 1001 points."""
    if not 0 < step <= 1:
        raise ValidationError(f"threshold step must be in (0, 1], got {step}")
    return np.linspace(0.0, 1.0, round(1.0 / step) + 1)


@dataclass(frozen=True)
class OrderedContext:
    name = "ordered_context"


@dataclass(frozen=True)
class ShuffledContext:
    seed: int
    name = "shuffled_context"


@dataclass(frozen=True)
class NoContext:
    name = "no_context"


RepCondition = OrderedContext | ShuffledContext | NoContext
CONDITION_NAMES = ("ordered_context", "shuffled_context", "no_context")


def condition_from_name(name: str, eval_seed: int = 0) -> RepCondition:
    if name == "ordered_context":
        return OrderedContext()
    if name == "shuffled_context":
        return ShuffledContext(eval_seed)
    if name == "no_context":
        return NoContext()
    raise ValidationError(f"unknown condition {name!r}; expected one of {CONDITION_NAMES}")


@dataclass
class ProbeInventory:
    """Probe words, each carrying exactly one semantic category."""

    probes: list[tuple[str, str]]

    def __post_init__(self):
        seen: set[str] = set()
        category_counts: dict[str, int] = {}
        for word, category in self.probes:
            if word != word.lower():
                raise ValidationError(f"probe {word!r} is not lowercase")
            if word in seen:
                raise ValidationError(f"probe {word!r} appears more than once")
            seen.add(word)
            category_counts[category] = category_counts.get(category, 0) + 1
        lonely = sorted(c for c, n in category_counts.items() if n < 2)
        if lonely:
            raise ValidationError(f"categories with fewer than 2 probes: {lonely}")

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.probes]

    @property
    def labels(self) -> list[str]:
        return [c for _, c in self.probes]

    @property
    def categories(self) -> list[str]:
        return sorted({c for _, c in self.probes})


def load_word_category_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Read a two-column CSV of (word, category); a literal "word,category"
    first row is treated as a header."""
    pairs: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 'word,category', got {row!r}")
            word, category = row[0].strip(), row[1].strip()
            if lineno == 1 and (word, category) == ("word", "category"):
                continue
            pairs.append((word, category))
    if not pairs:
        raise ValidationError(f"{path}: no rows")
    return pairs


def load_probe_inventory(path: str | Path) -> ProbeInventory:
    return ProbeInventory(load_word_category_pairs(path))


def validate_probes_in_vocab(inventory: ProbeInventory, vocab: Vocabulary) -> None:
    missing = [w for w in inventory.words if w not in vocab.word_to_id]
    if missing:
        raise ValidationError(
            f"{len(missing)} probes are out of vocabulary: {missing[:10]}"
            + ("..." if len(missing) > 10 else "")
        )


def _probe_windows(ids: np.ndarray, probe_id: int, window: int) -> np.ndarray | None:
    occurrences = np.flatnonzero(ids == probe_id)
    occurrences = occurrences[occurrences >= window - 1]
    if len(occurrences) == 0:
        return None
    offsets = np.arange(-(window - 1), 1)
    return ids[occurrences[:, None] + offsets[None, :]]


def _shuffle_contexts(contexts: np.ndarray, seed: int, probe_id: int) -> np.ndarray:
    """Permute the context positions of each window independently, probe kept
    last. The generator seed is derived per occurrence so results do not
    depend on evaluation order."""
    shuffled = contexts.copy()
    k = contexts.shape[1] - 1
    if k == 0:
        return shuffled
    for i in range(len(contexts)):
        rng = np.random.default_rng([seed, int(probe_id), i])
        shuffled[i, :k] = contexts[i, :k][rng.permutation(k)]
    return shuffled


def probe_representation(
    weights: SrnWeights,
    probe_id: int,
    condition: RepCondition,
    corpus: PreparedCorpus | None = None,
    window: int = 7,
) -> np.ndarray:
    """Hidden-state representation of one probe under a context condition.

    Context conditions average the post-probe hidden state over every
    stream position where the probe ends a full window; the no-context
    condition feeds the probe alone and needs no corpus.
    """
    if not 0 <= int(probe_id) < weights.vocab_size:
        raise ValidationError(f"probe id {probe_id} out of range")
    if isinstance(condition, NoContext):
        return batched_hidden(weights, np.asarray([[probe_id]], dtype=np.int64))[0]
    if corpus is None:
        raise ValidationError("context conditions require a prepared corpus")
    contexts = _probe_windows(corpus.training_ids, probe_id, window)
    if contexts is None:
        raise ProbeContextError(
            f"probe id {probe_id} never ends a full {window}-token window in the corpus"
        )
    if isinstance(condition, ShuffledContext):
        contexts = _shuffle_contexts(contexts, condition.seed, probe_id)
    return batched_hidden(weights, contexts).mean(axis=0)


def similarity_matrix(representations, measure: str = "cosine") -> np.ndarray:
    """All pairwise similarities, probe order preserved.

    Cosine over nonnegative hidden vectors keeps every entry in [0, 1], so
    the 0..1 threshold sweep is exhaustive. "correlation" (centered cosine)
    is offered for sensitivity analyses only; it can go negative.
    """
    reps = np.asarray(representations, dtype=np.float64)
    if reps.ndim != 2:
        raise ValidationError("representations must be a 2-D (probes x hidden) array")
    if measure == "correlation":
        reps = reps - reps.mean(axis=1, keepdims=True)
    elif measure != "cosine":
        raise ValidationError(f"unknown similarity measure {measure!r}")
    norms = np.linalg.norm(reps, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise ValidationError(
            f"cannot normalize zero representation vectors (rows {zero[:5].tolist()})"
        )
    unit = reps / norms[:, None]
    sims = unit @ unit.T
    lo = 0.0 if measure == "cosine" else -1.0
    np.clip(sims, lo, 1.0, out=sims)
    return sims


@dataclass
class BalancedAccuracyReport:
    """Sweep result: per-probe balanced accuracies at the best threshold
    (NaN where a probe was excluded), the smallest threshold attaining the
    maximal probe-mean, and the full mean-by-threshold curve."""

    per_probe_ba: np.ndarray
    best_threshold: float
    mean_ba: float
    excluded_probes: list[int]
    thresholds: np.ndarray
    mean_ba_by_threshold: np.ndarray
    degenerate: bool


def balanced_accuracy(similarities, labels, thresholds=None) -> BalancedAccuracyReport:
    """Threshold sweep over same/different-category judgments.

    At threshold r, a same-category pair with similarity > r is a hit (else
    a miss) and a different-category pair with similarity > r is a false
    alarm (else a correct rejection); ties count as "different". Probes with
    no same-category or no different-category partner cannot form a balanced
    accuracy and are excluded and listed. A matrix whose off-diagonal entries
    are all equal is flagged as degenerate.
    """
    sims = np.asarray(similarities, dtype=np.float64)
    n_probes = len(sims)
    if sims.shape != (n_probes, n_probes):
        raise ValidationError("similarity matrix must be square")
    labels = list(labels)
    if len(labels) != n_probes:
        raise ValidationError(f"{len(labels)} labels for {n_probes} probes")
    grid = default_threshold_grid() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    if grid.size == 0:
        raise ValidationError("threshold grid is empty")
    label_arr = np.asarray(labels, dtype=object)
    same = label_arr[:, None] == label_arr[None, :]
    np.fill_diagonal(same, False)
    offdiag = ~np.eye(n_probes, dtype=bool)
    diff = ~same & offdiag

    sens_rows: list[np.ndarray] = []
    spec_rows: list[np.ndarray] = []
    included: list[int] = []
    excluded: list[int] = []
    for i in range(n_probes):
        pos = np.sort(sims[i, same[i]])
        neg = np.sort(sims[i, diff[i]])
        if len(pos) == 0 or len(neg) == 0:
            excluded.append(i)
            continue
        included.append(i)
        sens_rows.append((len(pos) - np.searchsorted(pos, grid, side="right")) / len(pos))
        spec_rows.append(np.searchsorted(neg, grid, side="right") / len(neg))
    if not included:
        raise ValidationError("every probe lacks positive or negative pairs")

    ba = (np.asarray(sens_rows) + np.asarray(spec_rows)) / 2
    mean_curve = ba.mean(axis=0)
    best_idx = int(np.argmax(mean_curve))  # first maximum = smallest threshold
    per_probe = np.full(n_probes, np.nan)
    per_probe[np.asarray(included)] = ba[:, best_idx]
    off_values = sims[offdiag]
    degenerate = bool(off_values.size == 0 or np.ptp(off_values) <= 1e-12)
    return BalancedAccuracyReport(
        per_probe_ba=per_probe,
        best_threshold=float(grid[best_idx]),
        mean_ba=float(mean_curve[best_idx]),
        excluded_probes=excluded,
        thresholds=grid,
        mean_ba_by_threshold=mean_curve,
        degenerate=degenerate,
    )


def evaluate_semantics(
    weights: SrnWeights,
    corpus: PreparedCorpus,
    inventory: ProbeInventory,
    conditions: list[RepCondition],
    window: int = 7,
    thresholds=None,
    measure: str = "cosine",
) -> dict[str, BalancedAccuracyReport]:
    """Representations -> similarity -> balanced accuracy, per condition.

    Deterministic given the weights, the corpus, and the shuffled-context
    seed; degenerate similarity matrices are flagged on the report rather
    than scored silently.
    """
    vocab = corpus.vocab
    if vocab is None:
        raise ValidationError("corpus has no vocabulary attached")
    validate_probes_in_vocab(inventory, vocab)
    probe_ids = [vocab.word_to_id[w] for w in inventory.words]
    reports: dict[str, BalancedAccuracyReport] = {}
    for condition in conditions:
        reps = np.empty((len(probe_ids), weights.hidden_size))
        for row, (word, pid) in enumerate(zip(inventory.words, probe_ids)):
            try:
                reps[row] = probe_representation(weights, pid, condition, corpus, window)
            except ProbeContextError as exc:
                raise ProbeContextError(f"{condition.name}: probe {word!r}: {exc}") from exc
        sims = similarity_matrix(reps, measure=measure)
        report = balanced_accuracy(sims, inventory.labels, thresholds)
        if report.degenerate:
            log.warning(
                "%s: degenerate similarity matrix (all pairwise similarities equal)",
                condition.name,
            )
        reports[condition.name] = report
    return reports


def write_report_csv(
    report: BalancedAccuracyReport, inventory: ProbeInventory, path: str | Path
) -> None:
    """Per-probe rows plus a final "(mean)" summary row."""
    excluded = set(report.excluded_probes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "category", "balanced_accuracy", "excluded", "best_threshold", "degenerate"])
        for i, (word, category) in enumerate(inventory.probes):
            if i in excluded:
                writer.writerow([word, category, "", 1, "", ""])
            else:
                writer.writerow([word, category, report.per_probe_ba[i], 0, "", ""])
        writer.writerow(
            ["(mean)", "", report.mean_ba, "", report.best_threshold, int(report.degenerate)]
        )


_SIM_HEADER = struct.Struct("<4sHHQ")


def write_similarity_matrix(sims: np.ndarray, path: str | Path) -> None:
    """Row-major f64 dump with a dimension header."""
    sims = np.asarray(sims, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_SIM_HEADER.pack(SIMILARITY_MAGIC, SIMILARITY_FORMAT_VERSION, 0, len(sims)))
        fh.write(np.ascontiguousarray(sims, dtype="<f8").tobytes())


def read_similarity_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_SIM_HEADER.size)
        if len(header) < _SIM_HEADER.size:
            raise ValidationError(f"{path}: truncated similarity header")
        magic, version, _reserved, n = _SIM_HEADER.unpack(header)
        if magic != SIMILARITY_MAGIC:
            raise ValidationError(f"{path}: not a similarity file (bad magic {magic!r})")
        if version != SIMILARITY_FORMAT_VERSION:
            raise ValidationError(f"{path}: unsupported similarity format version {version}")
        data = np.frombuffer(fh.read(8 * n * n), dtype="<f8")
    if data.size != n * n:
        raise ValidationError(f"{path}: truncated similarity data")
    return data.astype(np.float64).reshape(n, n)
