"""Command-line entry point.

Subcommands: prepare (JSONL transcripts -> binary corpus + vocabulary),
analyze (corpus measures -> CSV/SVG), train (one model), experiment (the
full design from a YAML config), eval-semantic (checkpoint + probes ->
reports), report (aggregate an experiment directory -> CSV/SVG).

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, semeval, srn
from .corpus import (
    Chronological,
    PreparedCorpus,
    PunctuationMode,
    Shuffled,
    Vocabulary,
    prepare_corpus,
    load_transcripts_jsonl,
)
from .errors import OrdlearnError, ValidationError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are validation failures, not exit(2)
        raise ValidationError(message)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--vocab-size", type=int, default=None,
                        help="model vocabulary size (default: taken from the vocabulary file)")
    parser.add_argument("--hidden-size", type=int, default=512)
    parser.add_argument("--window", type=int, default=7)
    parser.add_argument("--epochs-per-partition", type=int, default=20)
    parser.add_argument("--learning-rate", type=float, default=0.01)
    parser.add_argument("--init-scale", type=float, default=0.05)
    parser.add_argument("--dtype", choices=["float64", "float32"], default="float64")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ordlearn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest JSONL transcripts into a binary corpus")
    p.add_argument("--input", required=True, help="JSONL file, one utterance per line")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--ordering", choices=["chronological", "shuffled"], default="chronological")
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--punctuation", choices=["retained", "removed"], default="retained")
    p.add_argument("--partitions", type=int, default=256)
    p.add_argument("--max-types", type=int, default=4096)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("analyze", help="corpus complexity measures to CSV/SVG")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--bin-size", type=int, default=10_000)
    p.add_argument("--n-bins", type=int, default=20)
    p.add_argument("--rolling-window", type=int, default=1_000)
    p.add_argument("--rolling-step", type=int, default=100)
    p.add_argument("--lexicon", default=None, help="word,category CSV for the half-split curves")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("train", help="train one model on a prepared corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--seed", type=int, default=0, help="weight initialization seed")
    _add_model_flags(p)
    p.add_argument("--probes", default=None, help="probe CSV; enables semantic evaluation")
    p.add_argument("--conditions", default="ordered_context,shuffled_context,no_context")
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--threshold-step", type=float, default=semeval.DEFAULT_THRESHOLD_STEP)
    p.add_argument("--eval-scope", choices=["full", "seen"], default="full")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("experiment", help="run the full design from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None, help="override the config output_dir")
    p.add_argument("--max-workers", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated replicate seeds override")
    p.add_argument("--orderings", default=None, help="comma-separated override")
    p.add_argument("--punctuations", default=None, help="comma-separated override")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("eval-semantic", help="evaluate one checkpoint on the probe inventory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--probes", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--conditions", default="ordered_context,shuffled_context,no_context")
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--threshold-step", type=float, default=semeval.DEFAULT_THRESHOLD_STEP)
    p.add_argument("--measure", choices=["cosine", "correlation"], default="cosine")
    p.add_argument("--dump-similarity", action="store_true",
                   help="also write the raw similarity matrices (binary f64)")
    p.set_defaults(func=_cmd_eval_semantic)

    p = sub.add_parser("report", help="aggregate an experiment directory into CSV/SVG")
    p.add_argument("--experiment-dir", required=True)
    p.add_argument("--output-dir", default=None, help="default: <experiment-dir>/report")
    p.set_defaults(func=_cmd_report)
    return parser


def _cmd_prepare(args) -> None:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcripts = load_transcripts_jsonl(args.input)
    ordering = Chronological() if args.ordering == "chronological" else Shuffled(args.shuffle_seed)
    prepared = prepare_corpus(
        transcripts,
        ordering,
        PunctuationMode(args.punctuation),
        n_partitions=args.partitions,
        max_types=args.max_types,
    )
    prepared.save(out / "corpus.ordl")
    prepared.vocab.save(out / "vocab.txt")
    log.info(
        "prepared %d tokens into %d partitions of %d (%s, %s); oov fraction %.4f",
        len(prepared.ids), prepared.n_partitions, prepared.partition_length,
        args.ordering, args.punctuation, prepared.vocab.oov_fraction,
    )


def _load_prepared(corpus_path: str, vocab_path: str) -> PreparedCorpus:
    vocab = Vocabulary.load(vocab_path)
    return PreparedCorpus.load(corpus_path, vocab)


def _cmd_analyze(args) -> None:
    prepared = _load_prepared(args.corpus, args.vocab)
    params = harness.AnalyticsParams(
        enabled=True,
        max_n=args.max_n,
        bin_size=args.bin_size,
        n_bins=args.n_bins,
        rolling_window=args.rolling_window,
        rolling_step=args.rolling_step,
        lexicon=args.lexicon,
        svg=not args.no_svg,
    )
    harness.write_corpus_analytics(prepared, args.output_dir, params)
    log.info("analytics written to %s", args.output_dir)


def _parse_conditions(spec: str, eval_seed: int) -> list:
    names = [name.strip() for name in spec.split(",") if name.strip()]
    return [semeval.condition_from_name(name, eval_seed) for name in names]


def _cmd_train(args) -> None:
    prepared = _load_prepared(args.corpus, args.vocab)
    config = srn.SrnConfig(
        vocab_size=args.vocab_size if args.vocab_size is not None else prepared.vocab.size,
        hidden_size=args.hidden_size,
        window=args.window,
        epochs_per_partition=args.epochs_per_partition,
        learning_rate=args.learning_rate,
        init_scale=args.init_scale,
        seed=args.seed,
        dtype=args.dtype,
    )
    inventory = semeval.load_probe_inventory(args.probes) if args.probes else None
    conditions = _parse_conditions(args.conditions, args.eval_seed) if args.probes else []
    entries = harness.run_single(
        prepared,
        config,
        args.output_dir,
        inventory=inventory,
        conditions=conditions,
        thresholds=semeval.default_threshold_grid(args.threshold_step),
        eval_scope=args.eval_scope,
    )
    log.info(
        "training complete: %d checkpoints, final cross-entropy %.4f",
        len(entries), entries[-1]["cross_entropy"],
    )


def _cmd_experiment(args) -> None:
    config = harness.load_config(args.config)
    if args.output_dir is not None:
        config.output_dir = str(Path(args.output_dir))
    if args.max_workers is not None:
        config.max_workers = args.max_workers
    if args.seeds is not None:
        config.replicate_seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if args.orderings is not None:
        config.orderings = [s.strip() for s in args.orderings.split(",") if s.strip()]
    if args.punctuations is not None:
        config.punctuations = [s.strip() for s in args.punctuations.split(",") if s.strip()]
    outcome = harness.run_experiment(config)
    if outcome.results:
        report_dir = Path(config.output_dir) / "report"
        table = harness.emit_report(outcome.results, report_dir)
        harness.plot_trajectories(table, "cross_entropy", report_dir / "cross_entropy.svg")
        for punct in sorted({r.punctuation for r in outcome.results}):
            harness.plot_trajectories(
                table, "balanced_accuracy",
                report_dir / f"balanced_accuracy_{punct}.svg", punctuation=punct,
            )
        log.info("report written to %s", report_dir)
    if outcome.failures:
        raise OrdlearnError(
            f"{len(outcome.failures)} of {len(outcome.failures) + len(outcome.results)} runs failed"
        )


def _cmd_eval_semantic(args) -> None:
    checkpoint = srn.load_checkpoint(args.checkpoint)
    prepared = _load_prepared(args.corpus, args.vocab)
    inventory = semeval.load_probe_inventory(args.probes)
    semeval.validate_probes_in_vocab(inventory, prepared.vocab)
    conditions = _parse_conditions(args.conditions, args.eval_seed)
    grid = semeval.default_threshold_grid(args.threshold_step)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe_ids = [prepared.vocab.word_to_id[w] for w in inventory.words]
    for condition in conditions:
        reps = np.empty((len(probe_ids), checkpoint.weights.hidden_size))
        for row, pid in enumerate(probe_ids):
            reps[row] = semeval.probe_representation(
                checkpoint.weights, pid, condition, prepared, checkpoint.config.window
            )
        sims = semeval.similarity_matrix(reps, measure=args.measure)
        report = semeval.balanced_accuracy(sims, inventory.labels, grid)
        semeval.write_report_csv(report, inventory, out / f"{condition.name}.csv")
        if args.dump_similarity:
            semeval.write_similarity_matrix(sims, out / f"{condition.name}.sims")
        log.info(
            "%s: mean balanced accuracy %.4f at threshold %.3f%s",
            condition.name, report.mean_ba, report.best_threshold,
            " (degenerate)" if report.degenerate else "",
        )


def _cmd_report(args) -> None:
    results = harness.load_results(args.experiment_dir)
    if not results:
        raise ValidationError(f"{args.experiment_dir} holds no completed runs")
    out = Path(args.output_dir) if args.output_dir else Path(args.experiment_dir) / "report"
    table = harness.emit_report(results, out)
    harness.plot_trajectories(table, "cross_entropy", out / "cross_entropy.svg")
    for punct in sorted({r.punctuation for r in results}):
        harness.plot_trajectories(
            table, "balanced_accuracy", out / f"balanced_accuracy_{punct}.svg", punctuation=punct
        )
    log.info("report written to %s", out)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OrdlearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - map anything unexpected to exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
