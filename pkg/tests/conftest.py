import numpy as np
import pytest

from ordlearn import corpus as oc
from ordlearn import harness, synth


@pytest.fixture
def toy_transcripts():
    return synth.synthetic_transcripts()


@pytest.fixture
def toy_corpus(toy_transcripts):
    """4000 retained-punctuation tokens in 8 partitions of 500, vocab 64."""
    return oc.prepare_corpus(
        toy_transcripts,
        oc.Chronological(),
        oc.PunctuationMode.RETAINED,
        n_partitions=8,
        max_types=64,
    )


@pytest.fixture
def toy_inputs(tmp_path, toy_transcripts):
    """JSONL corpus plus probe and lexicon CSVs on disk."""
    corpus_path = tmp_path / "corpus.jsonl"
    probes_path = tmp_path / "probes.csv"
    lexicon_path = tmp_path / "lexicon.csv"
    synth.write_transcripts_jsonl(toy_transcripts, corpus_path)
    synth.write_probe_csv(synth.synthetic_probes(), probes_path)
    synth.write_lexicon_csv(synth.synthetic_lexicon(), lexicon_path)
    return {"corpus": corpus_path, "probes": probes_path, "lexicon": lexicon_path}


def make_experiment_config(tmp_path, inputs, **overrides):
    defaults = dict(
        corpus_source=str(inputs["corpus"]),
        probes=str(inputs["probes"]),
        output_dir=str(tmp_path / "out"),
        orderings=["chronological", "shuffled"],
        punctuations=["retained"],
        n_partitions=8,
        max_types=64,
        model=harness.ModelParams(hidden_size=16, window=7, epochs_per_partition=5),
        replicate_seeds=[0, 1],
    )
    defaults.update(overrides)
    return harness.ExperimentConfig(**defaults)


def random_weights(rng, vocab, hidden, scale=0.8, bias_scale=0.5):
    from ordlearn.srn import SrnWeights

    return SrnWeights(
        w_ih=rng.uniform(-scale, scale, (vocab, hidden)),
        w_hh=rng.uniform(-scale, scale, (hidden, hidden)),
        b_h=rng.uniform(-bias_scale, bias_scale, hidden),
        w_ho=rng.uniform(-scale, scale, (hidden, vocab)),
        b_o=rng.uniform(-bias_scale, bias_scale, vocab),
    )
