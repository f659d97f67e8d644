"""Span-based prosodic structure prediction.

A character sequence is encoded, every span is scored per prosodic label,
an exact bottom-up search returns the best tree, and the tree converts to
the flat #1/#2/#3 boundary notation used by TTS front ends.  Training is
max-margin with loss-augmented decoding.
"""

from .core import (
    BoundarySequence,
    CharSequence,
    DUMMY,
    GeneralizedLabel,
    LabelVocabulary,
    LabeledSpan,
    ProsodicLevel,
    ProsodicTree,
    ValidationReport,
    binarize_derivation,
    format_line,
    hamming_delta,
    parse_line,
    repair_tree,
    sequence_to_tree,
    tree_to_sequence,
    validate_tree,
)
from .decoder import brute_force_decode, decode, decode_augmented, derivation_spans
from .encoder import CharVocab, EncoderConfig, encode
from .metrics import EvalReport, evaluate
from .model import ModelConfig, ModelParams
from .scorer import ScoreChart, ScorerParams, score_chart, span_rep, tree_score
from .trainer import TrainConfig, hinge_loss, train

__all__ = [
    "BoundarySequence",
    "CharSequence",
    "CharVocab",
    "DUMMY",
    "EncoderConfig",
    "EvalReport",
    "GeneralizedLabel",
    "LabelVocabulary",
    "LabeledSpan",
    "ModelConfig",
    "ModelParams",
    "ProsodicLevel",
    "ProsodicTree",
    "ScoreChart",
    "ScorerParams",
    "TrainConfig",
    "ValidationReport",
    "binarize_derivation",
    "brute_force_decode",
    "decode",
    "decode_augmented",
    "derivation_spans",
    "encode",
    "evaluate",
    "format_line",
    "hamming_delta",
    "hinge_loss",
    "parse_line",
    "repair_tree",
    "score_chart",
    "sequence_to_tree",
    "span_rep",
    "train",
    "tree_score",
    "tree_to_sequence",
    "validate_tree",
]

__version__ = "0.1.0"
