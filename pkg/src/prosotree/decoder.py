"""Exact bottom-up search for the highest-scoring tree over a score chart.

The search fills spans by increasing length.  A length-1 span's best score
is the best label alone; a longer span independently takes its best label
and its best split into two already-solved subspans (the two maximizations
are additive, so independent and joint optimization agree).  Backpointers
reconstruct the derivation; nodes that won the dummy label are omitted from
the returned tree, which undoes the binarization.  Ties break toward the
lowest label index and the smallest split point, so identical charts always
yield identical trees.

The loss-augmented variant runs the same search over a chart with +1 added
to every label that disagrees with the gold assignment, which makes the
optimum the most-violating tree under the Hamming distance on labeled
derivation spans.  A shape-enumerating brute force provides the independent
oracle for both searches at small n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DUMMY, LabeledSpan, ProsodicTree
from .scorer import ScoreChart, span_order

__all__ = ["DPTable", "DecodeResult", "decode", "decode_augmented", "augment_chart",
           "brute_force_decode", "BruteForceResult", "derivation_spans"]

MAX_BRUTE_FORCE_LEN = 8


@dataclass
class DPTable:
    """Best scores and backpointers: label winner per span, split per span
    of length >= 2 (-1 marks the length-1 spans that have no split)."""

    best: np.ndarray        # (n+1, n+1) float
    back_label: np.ndarray  # (n+1, n+1) int
    back_split: np.ndarray  # (n+1, n+1) int, -1 where absent


@dataclass
class DecodeResult:
    score: float
    tree: ProsodicTree
    derivation: tuple[LabeledSpan, ...]  # all 2n-1 spans, dummy included
    table: DPTable


def decode(chart: ScoreChart) -> DecodeResult:
    """Find the exact argmax tree; O(n^3 + L n^2)."""
    n = chart.n
    if n < 1:
        raise ValueError("cannot decode an empty chart")
    vocab = chart.vocab

    lbl_best = chart.scores.max(axis=2)      # argmax keeps the lowest index on ties
    lbl_arg = chart.scores.argmax(axis=2)

    # Python lists keep the split loop's per-iteration cost flat; `cols[j]`
    # mirrors best[k][j] so both operands of a split walk one list.
    rows = [[0.0] * (n + 1) for _ in range(n + 1)]
    cols = [[0.0] * (n + 1) for _ in range(n + 1)]
    back_split = np.full((n + 1, n + 1), -1, dtype=np.intp)

    for i in range(n):
        rows[i][i + 1] = lbl_best[i, i + 1]
        cols[i + 1][i] = rows[i][i + 1]
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length
            row_i = rows[i]
            col_j = cols[j]
            best_split = -np.inf
            best_k = -1
            for k in range(i + 1, j):
                v = row_i[k] + col_j[k]
                if v > best_split:
                    best_split = v
                    best_k = k
            total = lbl_best[i, j] + best_split
            rows[i][j] = total
            cols[j][i] = total
            back_split[i, j] = best_k

    table = DPTable(best=np.asarray(rows), back_label=lbl_arg.astype(np.intp), back_split=back_split)
    derivation = _reconstruct(table, vocab, n)
    tree = ProsodicTree(n, [s for s in derivation if not s.label.is_dummy])
    return DecodeResult(score=float(rows[0][n]), tree=tree, derivation=derivation, table=table)


def _reconstruct(table: DPTable, vocab, n: int) -> tuple[LabeledSpan, ...]:
    """Pre-order traversal of the backpointers (iterative, depth-safe)."""
    out: list[LabeledSpan] = []
    stack: list[tuple[int, int]] = [(0, n)]
    while stack:
        i, j = stack.pop()
        out.append(LabeledSpan(i, j, vocab.label_at(int(table.back_label[i, j]))))
        if j - i > 1:
            k = int(table.back_split[i, j])
            stack.append((k, j))
            stack.append((i, k))
    return tuple(out)


def augment_chart(chart: ScoreChart, gold: ProsodicTree) -> ScoreChart:
    """Chart with +1 on every (span, label) whose label disagrees with gold.

    The bonus applies to every label, the dummy included; decoding this
    chart maximizes score plus Hamming distance from the gold assignment.
    """
    if gold.sentence_len != chart.n:
        raise ValueError(f"gold tree over {gold.sentence_len}, chart over {chart.n}")
    vocab = chart.vocab
    n = chart.n
    grid = np.full((n + 1, n + 1), vocab.dummy_index, dtype=np.intp)
    for span in gold.spans:
        grid[span.i, span.j] = vocab.index_of(span.label)
    starts, ends = span_order(n)
    augmented = chart.scores.copy()
    augmented[starts, ends, :] += 1.0
    augmented[starts, ends, grid[starts, ends]] -= 1.0
    return ScoreChart(n=n, vocab=vocab, scores=augmented)


def decode_augmented(chart: ScoreChart, gold: ProsodicTree) -> DecodeResult:
    """Most-violating decode: argmax of s(T) + Hamming(T, gold).

    The returned score is the augmented one, i.e. tree score plus distance.
    """
    return decode(augment_chart(chart, gold))


def derivation_spans(result: DecodeResult) -> tuple[LabeledSpan, ...]:
    """The full binarized derivation behind a decode, dummy nodes included."""
    return result.derivation


@dataclass
class BruteForceResult:
    score: float
    derivation: tuple[LabeledSpan, ...]
    n_derivations: int  # labeled derivations covered: shapes * L^(2n-1)


def brute_force_decode(chart: ScoreChart, augment_gold: ProsodicTree | None = None) -> BruteForceResult:
    """Exhaustive oracle: every binary split shape, every label assignment.

    Scores are additive over derivation spans, so for each enumerated shape
    the best labeling takes each span's best label independently; the label
    loop is plain Python, sharing nothing with the vectorized search above.
    Only feasible for n <= 8 (shape count grows like the Catalan numbers).
    """
    n = chart.n
    if n > MAX_BRUTE_FORCE_LEN:
        raise ValueError(f"brute force capped at n={MAX_BRUTE_FORCE_LEN}, got {n}")
    vocab = chart.vocab
    L = len(vocab)

    gold_grid: dict[tuple[int, int], int] = {}
    if augment_gold is not None:
        if augment_gold.sentence_len != n:
            raise ValueError(f"gold tree over {augment_gold.sentence_len}, chart over {n}")
        gold_grid = {s.extent(): vocab.index_of(s.label) for s in augment_gold.spans}

    def span_best(i: int, j: int) -> tuple[float, int]:
        gold_lab = gold_grid.get((i, j), vocab.dummy_index) if augment_gold is not None else None
        best_v = -np.inf
        best_l = -1
        for lab in range(L):
            v = float(chart.scores[i, j, lab])
            if augment_gold is not None and lab != gold_lab:
                v += 1.0
            if v > best_v:
                best_v = v
                best_l = lab
        return best_v, best_l

    def shapes(i: int, j: int):
        if j == i + 1:
            yield ((i, j),)
            return
        for k in range(i + 1, j):
            for left in shapes(i, k):
                for right in shapes(k, j):
                    yield ((i, j),) + left + right

    best_score = -np.inf
    best_deriv: tuple[LabeledSpan, ...] = ()
    n_shapes = 0
    for shape in shapes(0, n):
        n_shapes += 1
        total = 0.0
        labs: list[int] = []
        for (i, j) in shape:
            v, lab = span_best(i, j)
            total += v
            labs.append(lab)
        if total > best_score:
            best_score = total
            best_deriv = tuple(
                LabeledSpan(i, j, vocab.label_at(lab)) for (i, j), lab in zip(shape, labs)
            )
    return BruteForceResult(
        score=float(best_score),
        derivation=best_deriv,
        n_derivations=n_shapes * L ** (2 * n - 1),
    )
