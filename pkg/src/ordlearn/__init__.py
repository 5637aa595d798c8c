"""Order-sensitive language-learning experiments on child-directed speech.

Corpus preparation (age ordering, partitioning, punctuation variants),
corpus complexity analytics, a simple recurrent network trained with
truncated BPTT, semantic-category evaluation via balanced accuracy, and a
deterministic experiment harness.
"""

from .corpus import (
    Chronological,
    EncodedStream,
    OrderingMode,
    PreparedCorpus,
    PunctuationMode,
    Shuffled,
    TokenStream,
    Transcript,
    Vocabulary,
    build_token_stream,
    build_vocabulary,
    decode,
    encode,
    load_transcripts_jsonl,
    order_transcripts,
    partition_stream,
    prepare_corpus,
    tokenize_utterance,
)
from .analytics import (
    EntropySeries,
    HalfSplitCurves,
    LocationProfile,
    NoveltyCurve,
    RollingStats,
    entropy_series,
    half_split_curves,
    location_profiles,
    novel_ngram_curve,
    partition_entropy,
    rolling_utterance_stats,
)
from .srn import (
    Checkpoint,
    SrnConfig,
    SrnWeights,
    checkpoint_partitions,
    cross_entropy,
    forward_step,
    init_weights,
    load_checkpoint,
    save_checkpoint,
    train_schedule,
    train_window,
)
from .semeval import (
    BalancedAccuracyReport,
    NoContext,
    OrderedContext,
    ProbeInventory,
    RepCondition,
    ShuffledContext,
    balanced_accuracy,
    evaluate_semantics,
    load_probe_inventory,
    probe_representation,
    similarity_matrix,
)
from .harness import (
    ExperimentConfig,
    ExperimentOutcome,
    RunResult,
    derive_seed,
    emit_report,
    load_config,
    plot_trajectories,
    run_experiment,
)
from .errors import (
    OrdlearnError,
    ProbeContextError,
    TrainingDivergedError,
    ValidationError,
)

__version__ = "0.1.0"
