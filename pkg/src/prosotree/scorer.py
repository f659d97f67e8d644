"""Span scoring: a label score for every span from fencepost differences.

The representation of span (i, j) is the fencepost difference v_j - v_i; a
two-layer ReLU network maps it to one score per non-dummy label.  The dummy
label used by binarization has no learned score and is pinned to exactly
zero in every chart, so inserting binarization nodes never changes a tree's
score.  All spans of a sentence are scored in one batched matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, embed_lookup, matmul, relu, reshape, sub
from .core import LabelVocabulary, ProsodicTree
from .encoder import EncodedSentence

__all__ = ["ScorerParams", "ScoreChart", "span_rep", "span_order", "score_spans",
           "score_chart", "chart_from_scores", "tree_score", "random_chart"]


@dataclass
class ScorerParams:
    """Feed-forward scorer weights; output width is the non-dummy label count."""

    w1: Tensor  # (d_hidden, d_model)
    z1: Tensor  # (d_hidden,)
    w2: Tensor  # (L-1, d_hidden)
    z2: Tensor  # (L-1,)

    @classmethod
    def initialize(cls, d_model: int, d_hidden: int, n_scored_labels: int,
                   rng: np.random.Generator) -> ScorerParams:
        bound1 = 1.0 / np.sqrt(d_model)
        bound2 = 1.0 / np.sqrt(d_hidden)
        return cls(
            w1=Tensor(rng.uniform(-bound1, bound1, size=(d_hidden, d_model)), requires_grad=True, name="scorer.w1"),
            z1=Tensor(np.zeros(d_hidden), requires_grad=True, name="scorer.z1"),
            w2=Tensor(rng.uniform(-bound2, bound2, size=(n_scored_labels, d_hidden)), requires_grad=True, name="scorer.w2"),
            z2=Tensor(np.zeros(n_scored_labels), requires_grad=True, name="scorer.z2"),
        )

    def named(self) -> dict[str, Tensor]:
        return {"scorer.w1": self.w1, "scorer.z1": self.z1, "scorer.w2": self.w2, "scorer.z2": self.z2}


@dataclass
class ScoreChart:
    """Dense scores s(i, j, l) for all 0 <= i < j <= n and every label."""

    n: int
    vocab: LabelVocabulary
    scores: np.ndarray  # (n+1, n+1, L); only i < j is meaningful

    def score(self, i: int, j: int, label_index: int) -> float:
        if not (0 <= i < j <= self.n):
            raise ValueError(f"span ({i},{j}) outside chart of length {self.n}")
        return float(self.scores[i, j, label_index])


def span_order(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical (i, j) enumeration of all spans: lexicographic, i < j."""
    return np.triu_indices(n + 1, k=1)


def span_rep(enc: EncodedSentence, i: int, j: int) -> Tensor:
    """Representation of one span: v_j - v_i, shape (d_model,)."""
    if not (0 <= i < j <= enc.n):
        raise ValueError(f"span ({i},{j}) out of range for sentence of length {enc.n}")
    vj = embed_lookup(enc.fencepost, np.asarray([j], dtype=np.intp))
    vi = embed_lookup(enc.fencepost, np.asarray([i], dtype=np.intp))
    return reshape(sub(vj, vi), (enc.d_model,))


def score_spans(enc: EncodedSentence, params: ScorerParams) -> tuple[np.ndarray, np.ndarray, Tensor]:
    """Score every span in canonical order through the batched feed-forward.

    Returns (starts, ends, scores) where scores has shape (n_spans, L-1),
    one column per non-dummy label in vocabulary order.
    """
    starts, ends = span_order(enc.n)
    reps = sub(embed_lookup(enc.fencepost, ends), embed_lookup(enc.fencepost, starts))
    hidden = relu(add(matmul(reps, params.w1, transpose_b=True), params.z1))
    scores = add(matmul(hidden, params.w2, transpose_b=True), params.z2)
    return starts, ends, scores


def chart_from_scores(n: int, vocab: LabelVocabulary, starts: np.ndarray, ends: np.ndarray,
                      scores: np.ndarray) -> ScoreChart:
    """Assemble the dense chart, pinning the dummy column to exactly zero."""
    L = len(vocab)
    if scores.shape != (len(starts), L - 1):
        raise ValueError(f"scores shape {scores.shape} != ({len(starts)}, {L - 1})")
    dense = np.zeros((n + 1, n + 1, L))
    cols = [k for k in range(L) if k != vocab.dummy_index]
    for col, lab in enumerate(cols):
        dense[starts, ends, lab] = scores[:, col]
    return ScoreChart(n=n, vocab=vocab, scores=dense)


def score_chart(enc: EncodedSentence, params: ScorerParams, vocab: LabelVocabulary) -> ScoreChart:
    """The full chart for one encoded sentence (values only, tape detached)."""
    starts, ends, scores = score_spans(enc, params)
    return chart_from_scores(enc.n, vocab, starts, ends, scores.data)


def tree_score(chart: ScoreChart, tree: ProsodicTree) -> float:
    """Sum of chart entries over the tree's labeled spans.

    Dummy-labeled binarization nodes score exactly zero, so summing a bare
    tree or its full derivation gives the same value.
    """
    if tree.sentence_len != chart.n:
        raise ValueError(f"tree over {tree.sentence_len} scored on chart of length {chart.n}")
    total = 0.0
    for span in tree.sorted_spans():
        total += chart.score(span.i, span.j, chart.vocab.index_of(span.label))
    return total


def random_chart(n: int, vocab: LabelVocabulary, rng: np.random.Generator,
                 spread: float = 1.0) -> ScoreChart:
    """A chart of N(0, spread) scores with the dummy column pinned; test and
    benchmark helper."""
    L = len(vocab)
    dense = np.zeros((n + 1, n + 1, L))
    starts, ends = span_order(n)
    for lab in range(L):
        if lab == vocab.dummy_index:
            continue
        dense[starts, ends, lab] = rng.normal(0.0, spread, size=len(starts))
    return ScoreChart(n=n, vocab=vocab, scores=dense)
