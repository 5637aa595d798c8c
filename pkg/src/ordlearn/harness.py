"""Experiment orchestration and reporting.

Runs the (corpus order) x (punctuation) x (replicate seed) design: one
prepared corpus and one training run per cell, six evaluation points per run
(cross-entropy plus the three representation conditions), everything
persisted under a content-addressed run directory so an interrupted
experiment resumes from the last completed checkpoint. Reporting aggregates
the per-run metrics into a long-format CSV, per-figure wide CSVs (mean and
SD across seeds), and SVG trajectory charts.

Per-cell corpus, weight, and evaluation seeds are derived from the master
seed and the cell descriptor with a keyed hash, so adding conditions never
perturbs existing cells; the shuffled corpus is reshuffled per replicate.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from csv import writer as csv_writer
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analytics, semeval, svg
from .corpus import (
    CORPUS_FORMAT_VERSION,
    Chronological,
    PreparedCorpus,
    PunctuationMode,
    Shuffled,
    Vocabulary,
    load_transcripts_jsonl,
    prepare_corpus,
)
from .errors import OrdlearnError, ValidationError
from .semeval import CONDITION_NAMES, ProbeInventory
from . import srn
from .srn import CHECKPOINT_FORMAT_VERSION, N_CHECKPOINTS, SrnConfig

log = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
RUN_SCHEMA_VERSION = 1

ORDERINGS = ("chronological", "shuffled")
PUNCTUATIONS = ("retained", "removed")
AVAILABLE_METRICS = ("cross_entropy", "balanced_accuracy")

LONG_CSV_HEADER = ["ordering", "punctuation", "seed", "checkpoint", "metric", "condition", "value"]


class _InterruptedRun(OrdlearnError):
    """Raised to simulate a crash right after a checkpoint is persisted."""


@dataclass
class ModelParams:
    hidden_size: int = 512
    window: int = 7
    epochs_per_partition: int = 20
    learning_rate: float = 0.01
    init_scale: float = 0.05
    dtype: str = "float64"


@dataclass
class AnalyticsParams:
    enabled: bool = False
    max_n: int = 6
    bin_size: int = analytics.DEFAULT_NOVELTY_BIN_SIZE
    n_bins: int = analytics.DEFAULT_HALF_SPLIT_BINS
    rolling_window: int = analytics.DEFAULT_ROLLING_WINDOW
    rolling_step: int = analytics.DEFAULT_ROLLING_STEP
    lexicon: str | None = None
    svg: bool = True


@dataclass
class ExperimentConfig:
    corpus_source: str
    probes: str
    output_dir: str
    orderings: list[str] = field(default_factory=lambda: list(ORDERINGS))
    punctuations: list[str] = field(default_factory=lambda: ["retained"])
    n_partitions: int = 256
    max_types: int = 4096
    model: ModelParams = field(default_factory=ModelParams)
    conditions: list[str] = field(default_factory=lambda: list(CONDITION_NAMES))
    threshold_step: float = semeval.DEFAULT_THRESHOLD_STEP
    master_seed: int = 0
    replicate_seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    eval_scope: str = "full"  # "seen" scores only the stream trained so far
    analytics: AnalyticsParams = field(default_factory=AnalyticsParams)
    max_workers: int = 1

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "corpus": {
                "source": str(self.corpus_source),
                "orderings": list(self.orderings),
                "punctuations": list(self.punctuations),
                "n_partitions": self.n_partitions,
                "max_types": self.max_types,
            },
            "model": asdict(self.model),
            "evaluation": {
                "probes": str(self.probes),
                "conditions": list(self.conditions),
                "threshold_step": self.threshold_step,
                "eval_scope": self.eval_scope,
            },
            "seeds": {"master": self.master_seed, "replicates": list(self.replicate_seeds)},
            "analytics": {
                **asdict(self.analytics),
                "lexicon": None if self.analytics.lexicon is None else str(self.analytics.lexicon),
            },
            "output_dir": str(self.output_dir),
            "max_workers": self.max_workers,
        }

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return str(p)

        version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ValidationError(f"unsupported config schema version {version}")
        corpus_sec = _section(raw, "corpus", {"source", "orderings", "punctuations", "n_partitions", "max_types"})
        model_sec = _section(raw, "model", set(ModelParams.__dataclass_fields__))
        eval_sec = _section(raw, "evaluation", {"probes", "conditions", "threshold_step", "eval_scope"})
        seeds_sec = _section(raw, "seeds", {"master", "replicates"})
        analytics_sec = _section(raw, "analytics", set(AnalyticsParams.__dataclass_fields__))
        known_top = {"schema_version", "corpus", "model", "evaluation", "seeds", "analytics", "output_dir", "max_workers"}
        unknown = set(raw) - known_top
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "source" not in corpus_sec:
            raise ValidationError("config is missing corpus.source")
        if "probes" not in eval_sec:
            raise ValidationError("config is missing evaluation.probes")
        if "output_dir" not in raw:
            raise ValidationError("config is missing output_dir")
        defaults = cls.__dataclass_fields__
        analytics_kwargs = dict(analytics_sec)
        if analytics_kwargs.get("lexicon"):
            analytics_kwargs["lexicon"] = resolve(analytics_kwargs["lexicon"])
        return cls(
            corpus_source=resolve(corpus_sec["source"]),
            probes=resolve(eval_sec["probes"]),
            output_dir=resolve(raw["output_dir"]),
            orderings=list(corpus_sec.get("orderings", defaults["orderings"].default_factory())),
            punctuations=list(corpus_sec.get("punctuations", defaults["punctuations"].default_factory())),
            n_partitions=corpus_sec.get("n_partitions", 256),
            max_types=corpus_sec.get("max_types", 4096),
            model=ModelParams(**model_sec),
            conditions=list(eval_sec.get("conditions", list(CONDITION_NAMES))),
            threshold_step=eval_sec.get("threshold_step", semeval.DEFAULT_THRESHOLD_STEP),
            master_seed=seeds_sec.get("master", 0),
            replicate_seeds=list(seeds_sec.get("replicates", [0, 1, 2, 3, 4])),
            eval_scope=eval_sec.get("eval_scope", "full"),
            analytics=AnalyticsParams(**analytics_kwargs),
            max_workers=raw.get("max_workers", 1),
        )


def _section(raw: dict, name: str, allowed: set[str]) -> dict:
    sec = raw.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ValidationError(f"config section {name!r} must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
    return sec


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return ExperimentConfig.from_dict(raw, base_dir=Path(path).parent)


def validate_config(config: ExperimentConfig) -> None:
    if not Path(config.corpus_source).is_file():
        raise ValidationError(f"corpus source {config.corpus_source} does not exist")
    if not Path(config.probes).is_file():
        raise ValidationError(f"probe inventory {config.probes} does not exist")
    for name, values, allowed in (
        ("orderings", config.orderings, ORDERINGS),
        ("punctuations", config.punctuations, PUNCTUATIONS),
        ("conditions", config.conditions, CONDITION_NAMES),
    ):
        if not values:
            raise ValidationError(f"{name} must not be empty")
        if len(set(values)) != len(values):
            raise ValidationError(f"{name} contains duplicates: {values}")
        bad = [v for v in values if v not in allowed]
        if bad:
            raise ValidationError(f"unknown {name}: {bad}; allowed: {list(allowed)}")
    if not config.replicate_seeds:
        raise ValidationError("replicate_seeds must not be empty")
    if len(set(config.replicate_seeds)) != len(config.replicate_seeds):
        raise ValidationError(f"replicate seeds must be distinct, got {config.replicate_seeds}")
    for seed in [config.master_seed, *config.replicate_seeds]:
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ValidationError(f"seeds must be integers in [0, 2**64), got {seed!r}")
    if config.n_partitions < 5:
        raise ValidationError("n_partitions must be >= 5 to place 6 distinct checkpoints")
    if config.max_types < 2:
        raise ValidationError("max_types must be >= 2")
    if config.eval_scope not in ("full", "seen"):
        raise ValidationError(f"eval_scope must be 'full' or 'seen', got {config.eval_scope!r}")
    if config.max_workers < 1:
        raise ValidationError("max_workers must be >= 1")
    semeval.default_threshold_grid(config.threshold_step)
    # reuse the model-side validation
    SrnConfig(
        vocab_size=config.max_types,
        hidden_size=config.model.hidden_size,
        window=config.model.window,
        epochs_per_partition=config.model.epochs_per_partition,
        learning_rate=config.model.learning_rate,
        init_scale=config.model.init_scale,
        seed=0,
        dtype=config.model.dtype,
    )
    a = config.analytics
    if a.enabled:
        if a.max_n < 1 or a.bin_size < 1 or a.n_bins < 2 or a.rolling_window < 2 or a.rolling_step < 1:
            raise ValidationError("analytics parameters out of range")
        if a.lexicon is not None and not Path(a.lexicon).is_file():
            raise ValidationError(f"analytics lexicon {a.lexicon} does not exist")


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit sub-seed from the master seed and a descriptor."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(master_seed)).encode())
    for part in parts:
        h.update(b"|")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class Cell:
    ordering: str
    punctuation: str
    replicate_seed: int

    def slug(self) -> str:
        return f"{self.ordering}_{self.punctuation}_s{self.replicate_seed}"


def cell_seeds(master_seed: int, cell: Cell) -> dict[str, int]:
    return {
        role: derive_seed(master_seed, cell.ordering, cell.punctuation, cell.replicate_seed, role)
        for role in ("corpus", "weights", "eval")
    }


def config_hash(config: ExperimentConfig) -> str:
    d = config.to_dict()
    d.pop("output_dir", None)
    d.pop("max_workers", None)
    return hashlib.blake2b(json.dumps(d, sort_keys=True).encode(), digest_size=8).hexdigest()


def _cell_run_dir(config: ExperimentConfig, cell: Cell) -> Path:
    tag = hashlib.blake2b(
        (config_hash(config) + json.dumps(asdict(cell), sort_keys=True)).encode(), digest_size=5
    ).hexdigest()
    return Path(config.output_dir) / "runs" / f"{cell.slug()}_{tag}"


@dataclass
class CheckpointRecord:
    index: int
    partitions_done: int
    tokens_trained: int
    path: str


@dataclass
class BaSummary:
    mean_ba: float
    best_threshold: float
    n_excluded: int
    degenerate: bool


@dataclass
class RunResult:
    ordering: str
    punctuation: str
    replicate_seed: int
    run_dir: str
    checkpoints: list[CheckpointRecord]
    cross_entropies: list[float]
    ba_summaries: dict[str, list[BaSummary]]


@dataclass
class RunFailure:
    ordering: str
    punctuation: str
    replicate_seed: int
    error: str


@dataclass
class ExperimentOutcome:
    results: list[RunResult]
    failures: list[RunFailure]


def _write_json_atomic(obj, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _write_metrics(run_dir: Path, entries: list[dict]) -> None:
    _write_json_atomic({"schema_version": RUN_SCHEMA_VERSION, "checkpoints": entries}, run_dir / "metrics.json")


def _load_complete_entries(run_dir: Path) -> list[dict]:
    """Metric entries whose checkpoint files exist, in order, stopping at the
    first gap; anything after a gap is retrained."""
    metrics_path = run_dir / "metrics.json"
    if not metrics_path.exists():
        return []
    try:
        entries = json.loads(metrics_path.read_text(encoding="utf-8")).get("checkpoints", [])
    except (json.JSONDecodeError, OSError) as exc:
        log.warning("%s unreadable (%s); restarting the run", metrics_path, exc)
        return []
    complete = []
    for k, entry in enumerate(entries):
        if "cross_entropy" in entry and (run_dir / f"checkpoint_{k}.srnw").exists():
            complete.append(entry)
        else:
            break
    return complete


def run_single(
    prepared: PreparedCorpus,
    srn_config: SrnConfig,
    out_dir: str | Path,
    inventory: ProbeInventory | None = None,
    conditions: list[semeval.RepCondition] | None = None,
    thresholds: np.ndarray | None = None,
    eval_scope: str = "full",
) -> list[dict]:
    """Train one model with checkpointed evaluation; resumable in place."""
    if thresholds is None:
        thresholds = semeval.default_threshold_grid()
    return _train_with_eval(
        prepared, srn_config, Path(out_dir), inventory, conditions or [], thresholds, eval_scope
    )


def _train_with_eval(
    prepared: PreparedCorpus,
    srn_config: SrnConfig,
    run_dir: Path,
    inventory: ProbeInventory | None,
    conditions: list[semeval.RepCondition],
    thresholds: np.ndarray,
    eval_scope: str = "full",
    stop_after_checkpoint: int | None = None,
) -> list[dict]:
    run_dir.mkdir(parents=True, exist_ok=True)
    entries = _load_complete_entries(run_dir)
    if len(entries) >= N_CHECKPOINTS:
        return entries[:N_CHECKPOINTS]
    train_stream = prepared.training_ids
    semantic_dir = run_dir / "semantic"
    if inventory is not None:
        semantic_dir.mkdir(exist_ok=True)

    def evaluate(ckpt: srn.Checkpoint, k: int) -> dict:
        stream = train_stream
        if eval_scope == "seen":
            stream = train_stream[: max(ckpt.partition_index, 1) * prepared.partition_length]
        entry = {
            "checkpoint": k,
            "partitions_done": ckpt.partition_index,
            "tokens_trained": ckpt.tokens_trained,
            "cross_entropy": srn.cross_entropy(ckpt.weights, stream, ckpt.config.window),
        }
        if inventory is not None:
            reports = semeval.evaluate_semantics(
                ckpt.weights, prepared, inventory, conditions, ckpt.config.window, thresholds
            )
            summary = {}
            for name, report in reports.items():
                semeval.write_report_csv(report, inventory, semantic_dir / f"checkpoint{k}_{name}.csv")
                summary[name] = {
                    "mean_ba": report.mean_ba,
                    "best_threshold": report.best_threshold,
                    "n_excluded": len(report.excluded_probes),
                    "degenerate": report.degenerate,
                }
            entry["balanced_accuracy"] = summary
        return entry

    def hook(ckpt: srn.Checkpoint) -> None:
        k = len(entries)
        srn.save_checkpoint(ckpt, run_dir / f"checkpoint_{k}.srnw")
        entries.append(evaluate(ckpt, k))
        _write_metrics(run_dir, entries)
        if stop_after_checkpoint is not None and k >= stop_after_checkpoint:
            raise _InterruptedRun(f"stopped after checkpoint {k} as requested")

    if entries:
        resume = srn.load_checkpoint(run_dir / f"checkpoint_{len(entries) - 1}.srnw")
        if resume.config != srn_config:
            raise ValidationError(
                f"{run_dir}: on-disk checkpoints were trained with a different configuration"
            )
        log.info("resuming %s from checkpoint %d", run_dir.name, len(entries) - 1)
        srn.train_schedule(None, prepared, srn_config, hook, resume_from=resume)
    else:
        srn.train_schedule(srn.init_weights(srn_config), prepared, srn_config, hook)
    return entries


def _run_info(config: ExperimentConfig, cell: Cell, status: str) -> dict:
    return {
        "schema_version": RUN_SCHEMA_VERSION,
        "status": status,
        "cell": asdict(cell),
        "seeds": cell_seeds(config.master_seed, cell),
        "config_hash": config_hash(config),
        "format_versions": {
            "corpus": CORPUS_FORMAT_VERSION,
            "checkpoint": CHECKPOINT_FORMAT_VERSION,
            "metrics": RUN_SCHEMA_VERSION,
        },
        "corpus_source": str(config.corpus_source),
        "probes": str(config.probes),
        "n_partitions": config.n_partitions,
        "max_types": config.max_types,
        "model": asdict(config.model),
        "conditions": list(config.conditions),
        "threshold_step": config.threshold_step,
        "eval_scope": config.eval_scope,
    }


def _run_cell(
    config: ExperimentConfig,
    cell: Cell,
    transcripts=None,
    stop_after_checkpoint: int | None = None,
) -> RunResult:
    run_dir = _cell_run_dir(config, cell)
    run_dir.mkdir(parents=True, exist_ok=True)
    seeds = cell_seeds(config.master_seed, cell)
    corpus_path = run_dir / "corpus.ordl"
    vocab_path = run_dir / "vocab.txt"
    if corpus_path.exists() and vocab_path.exists():
        vocab = Vocabulary.load(vocab_path)
        prepared = PreparedCorpus.load(corpus_path, vocab)
    else:
        if transcripts is None:
            transcripts = load_transcripts_jsonl(config.corpus_source)
        ordering = Chronological() if cell.ordering == "chronological" else Shuffled(seeds["corpus"])
        prepared = prepare_corpus(
            transcripts,
            ordering,
            PunctuationMode(cell.punctuation),
            n_partitions=config.n_partitions,
            max_types=config.max_types,
        )
        prepared.save(corpus_path)
        prepared.vocab.save(vocab_path)
    srn_config = SrnConfig(
        vocab_size=prepared.vocab.size,
        hidden_size=config.model.hidden_size,
        window=config.model.window,
        epochs_per_partition=config.model.epochs_per_partition,
        learning_rate=config.model.learning_rate,
        init_scale=config.model.init_scale,
        seed=seeds["weights"],
        dtype=config.model.dtype,
    )
    inventory = semeval.load_probe_inventory(config.probes)
    conditions = [semeval.condition_from_name(n, seeds["eval"]) for n in config.conditions]
    thresholds = semeval.default_threshold_grid(config.threshold_step)
    _write_json_atomic(_run_info(config, cell, "running"), run_dir / "run.json")
    _train_with_eval(
        prepared, srn_config, run_dir, inventory, conditions, thresholds,
        eval_scope=config.eval_scope, stop_after_checkpoint=stop_after_checkpoint,
    )
    _write_json_atomic(_run_info(config, cell, "complete"), run_dir / "run.json")
    return _load_run_result(run_dir)


def _load_run_result(run_dir: Path) -> RunResult:
    info = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    if info.get("status") != "complete":
        raise ValidationError(f"{run_dir}: run is not complete (status {info.get('status')!r})")
    entries = json.loads((run_dir / "metrics.json").read_text(encoding="utf-8"))["checkpoints"]
    if len(entries) != N_CHECKPOINTS:
        raise ValidationError(f"{run_dir}: expected {N_CHECKPOINTS} checkpoints, found {len(entries)}")
    cell = info["cell"]
    ba: dict[str, list[BaSummary]] = {}
    for name in info.get("conditions", []):
        ba[name] = [BaSummary(**entry["balanced_accuracy"][name]) for entry in entries]
    return RunResult(
        ordering=cell["ordering"],
        punctuation=cell["punctuation"],
        replicate_seed=cell["replicate_seed"],
        run_dir=str(run_dir),
        checkpoints=[
            CheckpointRecord(
                index=entry["checkpoint"],
                partitions_done=entry["partitions_done"],
                tokens_trained=entry["tokens_trained"],
                path=str(run_dir / f"checkpoint_{entry['checkpoint']}.srnw"),
            )
            for entry in entries
        ],
        cross_entropies=[entry["cross_entropy"] for entry in entries],
        ba_summaries=ba,
    )


def _run_cell_worker(config_dict: dict, cell_tuple: tuple) -> tuple[str, str]:
    config = ExperimentConfig.from_dict(config_dict)
    cell = Cell(*cell_tuple)
    try:
        result = _run_cell(config, cell)
        return ("ok", result.run_dir)
    except Exception as exc:  # noqa: BLE001 - worker failures must not kill the pool
        return ("error", f"{type(exc).__name__}: {exc}")


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """Execute every design cell; failures are recorded without aborting
    sibling runs, and a rerun resumes each cell from its last checkpoint."""
    validate_config(config)
    out = Path(config.output_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    _write_json_atomic(
        {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "config": config.to_dict(),
            "config_hash": config_hash(config),
            "format_versions": {
                "corpus": CORPUS_FORMAT_VERSION,
                "checkpoint": CHECKPOINT_FORMAT_VERSION,
            },
        },
        out / "experiment.json",
    )
    cells = [
        Cell(o, p, s)
        for o in config.orderings
        for p in config.punctuations
        for s in config.replicate_seeds
    ]
    results: list[RunResult] = []
    failures: list[RunFailure] = []
    if config.max_workers <= 1:
        transcripts = load_transcripts_jsonl(config.corpus_source)
        for cell in cells:
            try:
                results.append(_run_cell(config, cell, transcripts))
            except Exception as exc:  # noqa: BLE001 - sibling runs continue
                log.error("run %s failed: %s", cell.slug(), exc)
                failures.append(RunFailure(cell.ordering, cell.punctuation, cell.replicate_seed, str(exc)))
                _record_failure(config, cell, str(exc))
    else:
        config_dict = config.to_dict()
        with ProcessPoolExecutor(max_workers=config.max_workers) as pool:
            futures = [
                pool.submit(_run_cell_worker, config_dict, (cell.ordering, cell.punctuation, cell.replicate_seed))
                for cell in cells
            ]
            for cell, future in zip(cells, futures):
                status, payload = future.result()
                if status == "ok":
                    results.append(_load_run_result(Path(payload)))
                else:
                    log.error("run %s failed: %s", cell.slug(), payload)
                    failures.append(RunFailure(cell.ordering, cell.punctuation, cell.replicate_seed, payload))
                    _record_failure(config, cell, payload)
    results.sort(key=lambda r: (r.ordering, r.punctuation, r.replicate_seed))
    if failures:
        _write_json_atomic(
            {"failures": [asdict(f) for f in failures]}, out / "failures.json"
        )
    if config.analytics.enabled and results:
        _emit_analytics(config, results)
    return ExperimentOutcome(results=results, failures=failures)


def _record_failure(config: ExperimentConfig, cell: Cell, message: str) -> None:
    try:
        run_dir = _cell_run_dir(config, cell)
        run_dir.mkdir(parents=True, exist_ok=True)
        info = _run_info(config, cell, "failed")
        info["error"] = message
        _write_json_atomic(info, run_dir / "run.json")
    except OSError:
        log.warning("could not record the failure of %s", cell.slug())


def load_results(experiment_dir: str | Path) -> list[RunResult]:
    """Collect every completed run under an experiment directory."""
    runs_dir = Path(experiment_dir) / "runs"
    if not runs_dir.is_dir():
        raise ValidationError(f"{experiment_dir} holds no runs/ directory")
    results = []
    for run_dir in sorted(runs_dir.iterdir()):
        info_path = run_dir / "run.json"
        if not info_path.exists():
            continue
        info = json.loads(info_path.read_text(encoding="utf-8"))
        if info.get("status") == "complete":
            results.append(_load_run_result(run_dir))
        else:
            log.warning("skipping %s (status %r)", run_dir.name, info.get("status"))
    results.sort(key=lambda r: (r.ordering, r.punctuation, r.replicate_seed))
    return results


def _emit_analytics(config: ExperimentConfig, results: list[RunResult]) -> None:
    seen: set[tuple[str, str]] = set()
    for result in results:
        key = (result.ordering, result.punctuation)
        if key in seen:
            continue
        seen.add(key)
        run_dir = Path(result.run_dir)
        vocab = Vocabulary.load(run_dir / "vocab.txt")
        prepared = PreparedCorpus.load(run_dir / "corpus.ordl", vocab)
        out_dir = Path(config.output_dir) / "analytics" / f"{result.ordering}_{result.punctuation}"
        out_dir.mkdir(parents=True, exist_ok=True)
        write_corpus_analytics(prepared, out_dir, config.analytics)


def write_corpus_analytics(
    prepared: PreparedCorpus, out_dir: str | Path, params: AnalyticsParams | None = None
) -> None:
    """All corpus measures as CSV (plus small SVG charts) for one variant."""
    params = params or AnalyticsParams()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stream = prepared.training_ids
    max_n = min(params.max_n, len(stream))
    curves = [analytics.novel_ngram_curve(stream, n, params.bin_size) for n in range(1, max_n + 1)]
    analytics.write_novelty_csv(curves, out_dir / "novelty.csv")
    series = analytics.entropy_series(prepared)
    analytics.write_entropy_csv(series, out_dir / "entropy.csv")
    lengths = prepared.utterance_lengths(training_order=True)
    try:
        stats = analytics.rolling_utterance_stats(lengths, params.rolling_window, params.rolling_step)
        analytics.write_rolling_csv(stats, out_dir / "utterance_stats.csv")
    except ValidationError as exc:
        log.warning("rolling utterance stats skipped: %s", exc)
    if prepared.vocab is not None:
        profiles = analytics.location_profiles(stream, prepared.vocab)
        analytics.write_location_csv(profiles, out_dir / "locations.csv")
        if params.lexicon:
            lexicon = dict(semeval.load_word_category_pairs(params.lexicon))
            half = analytics.half_split_curves(profiles, lexicon, stream, prepared.vocab, params.n_bins)
            analytics.write_half_split_csv(half, out_dir / "half_split.csv")
    if params.svg:
        svg.render_line_chart(
            [
                svg.Series(
                    label=f"n={c.n}",
                    xs=[float(i) for i in range(len(c.cumulative_novel))],
                    ys=[float(v) for v in c.cumulative_novel],
                )
                for c in curves
            ],
            title="novel n-grams by stream position",
            x_label=f"bin ({params.bin_size} positions each)",
            y_label="cumulative novel n-grams",
            path=out_dir / "novelty.svg",
        )
        svg.render_line_chart(
            [
                svg.Series(
                    label="entropy",
                    xs=[float(i) for i in range(len(series.per_partition_bits))],
                    ys=series.per_partition_bits,
                )
            ],
            title="per-partition entropy",
            x_label="partition (visit order)",
            y_label="entropy (bits)",
            path=out_dir / "entropy.svg",
        )


@dataclass(frozen=True)
class ReportRow:
    ordering: str
    punctuation: str
    seed: int
    checkpoint: int
    metric: str
    condition: str
    value: float


@dataclass
class ReportTable:
    rows: list[ReportRow]


def build_report_table(results: list[RunResult]) -> ReportTable:
    """Long format: one row per (run, checkpoint, metric, condition)."""
    rows: list[ReportRow] = []
    for r in sorted(results, key=lambda r: (r.ordering, r.punctuation, r.replicate_seed)):
        for k in range(N_CHECKPOINTS):
            rows.append(
                ReportRow(r.ordering, r.punctuation, r.replicate_seed, k, "cross_entropy", "", r.cross_entropies[k])
            )
            for name in (c for c in CONDITION_NAMES if c in r.ba_summaries):
                rows.append(
                    ReportRow(
                        r.ordering, r.punctuation, r.replicate_seed, k,
                        "balanced_accuracy", name, r.ba_summaries[name][k].mean_ba,
                    )
                )
    return ReportTable(rows)


def _aggregate(rows: list[ReportRow], key_fn) -> dict:
    """(key, checkpoint) -> (mean, sd); sd is None for single values."""
    grouped: dict[tuple, list[float]] = {}
    for row in rows:
        grouped.setdefault((key_fn(row), row.checkpoint), []).append(row.value)
    out = {}
    for key, values in grouped.items():
        mean = float(np.mean(values))
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else None
        out[key] = (mean, sd)
    return out


def _write_wide_csv(path: Path, series_keys: list[tuple], labels: list[str], stats: dict) -> None:
    checkpoints = sorted({ck for (_, ck) in stats})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv_writer(fh)
        header = ["checkpoint"]
        for label in labels:
            header += [f"{label}_mean", f"{label}_sd"]
        writer.writerow(header)
        for ck in checkpoints:
            row: list = [ck]
            for key in series_keys:
                mean, sd = stats.get((key, ck), (None, None))
                row.append("" if mean is None else mean)
                row.append("" if sd is None else sd)
            writer.writerow(row)


def emit_report(results: list[RunResult], out_dir: str | Path) -> ReportTable:
    """Long-format CSV plus per-figure wide CSVs (mean and SD across seeds)."""
    if not results:
        raise ValidationError("no completed runs to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = build_report_table(results)
    with open(out_dir / "results_long.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv_writer(fh)
        writer.writerow(LONG_CSV_HEADER)
        for row in table.rows:
            writer.writerow(
                [row.ordering, row.punctuation, row.seed, row.checkpoint, row.metric, row.condition, row.value]
            )
    ce_rows = [r for r in table.rows if r.metric == "cross_entropy"]
    ce_keys = sorted({(r.ordering, r.punctuation) for r in ce_rows})
    _write_wide_csv(
        out_dir / "fig_cross_entropy.csv",
        ce_keys,
        [f"{o}_{p}" for o, p in ce_keys],
        _aggregate(ce_rows, lambda r: (r.ordering, r.punctuation)),
    )
    ba_rows = [r for r in table.rows if r.metric == "balanced_accuracy"]
    for punct in sorted({r.punctuation for r in ba_rows}):
        rows_p = [r for r in ba_rows if r.punctuation == punct]
        orderings = sorted({r.ordering for r in rows_p})
        conditions = [c for c in CONDITION_NAMES if any(r.condition == c for r in rows_p)]
        keys = [(o, c) for o in orderings for c in conditions]
        _write_wide_csv(
            out_dir / f"fig_balanced_accuracy_{punct}.csv",
            keys,
            [f"{o}_{c}" for o, c in keys],
            _aggregate(rows_p, lambda r: (r.ordering, r.condition)),
        )
    return table


def plot_trajectories(
    table: ReportTable, metric: str, path: str | Path, punctuation: str | None = None
) -> Path:
    """One SVG line chart: a series per (ordering x condition), x = checkpoint
    index, y = mean across seeds with symmetric SD error bars."""
    if metric not in AVAILABLE_METRICS:
        raise ValidationError(
            f"unknown metric {metric!r}; available metrics: {', '.join(AVAILABLE_METRICS)}"
        )
    rows = [
        r for r in table.rows
        if r.metric == metric and (punctuation is None or r.punctuation == punctuation)
    ]
    orderings = sorted({r.ordering for r in table.rows})
    if metric == "cross_entropy":
        puncts = sorted({r.punctuation for r in table.rows}) if punctuation is None else [punctuation]
        candidates = [(o, p) for o in orderings for p in puncts]
        key_fn = lambda r: (r.ordering, r.punctuation)  # noqa: E731
    else:
        conds = [c for c in CONDITION_NAMES if any(r.condition == c for r in table.rows)]
        candidates = [(o, c) for o in orderings for c in conds]
        key_fn = lambda r: (r.ordering, r.condition)  # noqa: E731
    stats = _aggregate(rows, key_fn)
    series = []
    for key in candidates:
        checkpoints = sorted({ck for (k, ck) in stats if k == key})
        if not checkpoints:
            log.warning("series %s has no data for metric %s; skipped", "/".join(key), metric)
            continue
        means = [stats[(key, ck)][0] for ck in checkpoints]
        sds = [stats[(key, ck)][1] or 0.0 for ck in checkpoints]
        series.append(svg.Series(label="/".join(key), xs=[float(c) for c in checkpoints], ys=means, sds=sds))
    if not series:
        raise ValidationError(f"report holds no data for metric {metric!r}")
    y_label = "cross-entropy (nats)" if metric == "cross_entropy" else "balanced accuracy"
    title = metric.replace("_", " ") + (f" ({punctuation} punctuation)" if punctuation else "")
    svg.render_line_chart(series, title=title, x_label="checkpoint", y_label=y_label, path=path)
    return Path(path)
