"""CoSeRec: contrastive self-supervised sequential recommendation.

A training laboratory for next-item recommendation with informative sequence
augmentation, hybrid item correlations, a causal self-attention encoder,
joint next-item + contrastive optimization, and robustness/ablation
experiment drivers.
"""

from .augment import AugmentParams, AugmentedPair, augment_pair
from .corpus import (
    Interaction,
    SequenceCorpus,
    UserSequence,
    Vocabulary,
    apply_k_core,
    build_corpus,
    corpus_from_sequences,
    inject_test_noise,
    load_corpus,
    load_interactions,
    save_corpus,
    subsample_training,
)
from .correlation import (
    CorrelationTable,
    correlation_for_epoch,
    hybrid_correlation,
    memory_correlation,
    model_correlation,
)
from .encoder import EncoderConfig, SequenceEncoder, load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    CoSeRecError,
    EmptyDataError,
    InvalidCorpusError,
    NumericError,
    ParseError,
)
from .estimator import CoSeRec
from .evaluator import (
    MetricReport,
    ablation_suite,
    evaluate,
    hr_at_k,
    ndcg_at_k,
    rank_from_scores,
    rank_target,
    robustness_suite,
)
from .objectives import joint_loss, ntxent, rec_loss
from .synthetic import planted_markov_corpus
from .trainer import Adam, TrainConfig, TrainLog, train, train_two_stage

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AugmentParams",
    "AugmentedPair",
    "CoSeRec",
    "CoSeRecError",
    "ConfigError",
    "CorrelationTable",
    "EmptyDataError",
    "EncoderConfig",
    "Interaction",
    "InvalidCorpusError",
    "MetricReport",
    "NumericError",
    "ParseError",
    "SequenceCorpus",
    "SequenceEncoder",
    "TrainConfig",
    "TrainLog",
    "UserSequence",
    "Vocabulary",
    "ablation_suite",
    "apply_k_core",
    "augment_pair",
    "build_corpus",
    "corpus_from_sequences",
    "correlation_for_epoch",
    "evaluate",
    "hr_at_k",
    "hybrid_correlation",
    "inject_test_noise",
    "joint_loss",
    "load_checkpoint",
    "load_corpus",
    "load_interactions",
    "memory_correlation",
    "model_correlation",
    "ndcg_at_k",
    "ntxent",
    "planted_markov_corpus",
    "rank_from_scores",
    "rank_target",
    "rec_loss",
    "robustness_suite",
    "save_checkpoint",
    "save_corpus",
    "subsample_training",
    "train",
    "train_two_stage",
]
