"""Span scoring: dummy pinning, hand-checked feed-forward, linearity."""

import numpy as np
import pytest

from prosotree.autodiff import Tensor, grad_check
from prosotree.core import (
    CharSequence,
    GeneralizedLabel,
    LabelVocabulary,
    LabeledSpan,
    ProsodicLevel,
    ProsodicTree,
    parse_line,
    sequence_to_tree,
)
from prosotree.encoder import CharVocab, EncoderConfig, EncodedSentence, encode, init_encoder_params
from prosotree.scorer import (
    ScorerParams,
    chart_from_scores,
    random_chart,
    score_chart,
    score_spans,
    span_order,
    span_rep,
    tree_score,
)

PW, PPH, IPH = ProsodicLevel.PW, ProsodicLevel.PPH, ProsodicLevel.IPH


def encoded(vectors) -> EncodedSentence:
    return EncodedSentence(fencepost=Tensor(np.asarray(vectors, dtype=float)))


class TestSpanRep:
    def test_difference_of_fenceposts(self):
        enc = encoded([[0.0, 1.0], [2.0, 5.0], [7.0, 11.0]])
        rep = span_rep(enc, 0, 2)
        assert np.allclose(rep.data, [7.0, 10.0])

    def test_equal_fenceposts_give_zero(self):
        enc = encoded([[1.0, 2.0], [1.0, 2.0]])
        assert np.allclose(span_rep(enc, 0, 1).data, 0.0)

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(5, 3))
        shifted = base + 17.5
        assert np.allclose(span_rep(encoded(base), 1, 4).data,
                           span_rep(encoded(shifted), 1, 4).data)

    def test_degenerate_span_rejected(self):
        enc = encoded([[0.0], [1.0]])
        with pytest.raises(ValueError):
            span_rep(enc, 1, 1)


class TestScoreChart:
    def test_zero_output_layer_gives_zero_chart(self):
        vocab = LabelVocabulary.default()
        enc = encoded(np.random.default_rng(1).normal(size=(4, 6)))
        params = ScorerParams(
            w1=Tensor(np.random.default_rng(2).normal(size=(5, 6)), requires_grad=True),
            z1=Tensor(np.zeros(5), requires_grad=True),
            w2=Tensor(np.zeros((len(vocab) - 1, 5)), requires_grad=True),
            z2=Tensor(np.zeros(len(vocab) - 1), requires_grad=True),
        )
        chart = score_chart(enc, params, vocab)
        assert np.array_equal(chart.scores, np.zeros_like(chart.scores))

    def test_hand_computed_two_by_two_ffn(self):
        # one span (0,1), rep = v1 - v0 = [1, 2]; relu(W1 r + z1) @ W2 + z2 by hand
        vocab = LabelVocabulary([GeneralizedLabel(), GeneralizedLabel.of(PW)])
        enc = encoded([[0.0, 0.0], [1.0, 2.0]])
        w1 = np.asarray([[1.0, -1.0], [0.5, 0.25]])
        z1 = np.asarray([0.25, -0.5])
        w2 = np.asarray([[2.0, 3.0]])
        z2 = np.asarray([-1.0])
        params = ScorerParams(w1=Tensor(w1), z1=Tensor(z1), w2=Tensor(w2), z2=Tensor(z2))
        hidden = np.maximum(w1 @ np.array([1.0, 2.0]) + z1, 0.0)
        expected = float((w2 @ hidden + z2)[0])
        chart = score_chart(enc, params, vocab)
        assert chart.score(0, 1, 1) == pytest.approx(expected, abs=1e-12)
        assert chart.score(0, 1, 0) == 0.0

    def test_shape_and_dummy_pinning(self):
        vocab = LabelVocabulary.default()
        rng = np.random.default_rng(3)
        enc = encoded(rng.normal(size=(6, 8)))
        params = ScorerParams.initialize(8, 10, len(vocab) - 1, rng)
        chart = score_chart(enc, params, vocab)
        starts, ends = span_order(5)
        assert len(starts) == 15
        assert np.array_equal(chart.scores[starts, ends, vocab.dummy_index],
                              np.zeros(15))

    def test_batched_equals_per_span(self):
        vocab = LabelVocabulary.default()
        rng = np.random.default_rng(4)
        enc = encoded(rng.normal(size=(7, 8)))
        params = ScorerParams.initialize(8, 12, len(vocab) - 1, rng)
        chart = score_chart(enc, params, vocab)
        for i in range(7):
            for j in range(i + 1, 7):
                rep = span_rep(enc, i, j)
                r = rep.data
                hidden = np.maximum(params.w1.data @ r + params.z1.data, 0.0)
                per_span = params.w2.data @ hidden + params.z2.data
                for lab in range(len(vocab)):
                    if lab == vocab.dummy_index:
                        continue
                    col = vocab.nondummy_column(lab)
                    assert abs(chart.score(i, j, lab) - per_span[col]) < 1e-12


class TestTreeScore:
    def test_empty_tree_scores_zero(self):
        vocab = LabelVocabulary.default()
        chart = random_chart(4, vocab, np.random.default_rng(0))
        assert tree_score(chart, ProsodicTree(4, [])) == 0.0

    def test_single_span(self):
        vocab = LabelVocabulary.default()
        chart = random_chart(3, vocab, np.random.default_rng(1))
        label = GeneralizedLabel.of(PW, PPH, IPH)
        idx = vocab.index_of(label)
        chart.scores[0, 3, idx] = 1.5
        tree = ProsodicTree(3, [LabeledSpan(0, 3, label)])
        assert tree_score(chart, tree) == pytest.approx(1.5)

    def test_matches_independent_loop(self):
        vocab = LabelVocabulary.default()
        rng = np.random.default_rng(2)
        for _ in range(50):
            chart = random_chart(5, vocab, rng)
            seq = parse_line("ab#1c#2de#3")
            tree = sequence_to_tree(seq)
            expected = 0.0
            for span in tree.spans:
                expected += chart.scores[span.i, span.j, vocab.index_of(span.label)]
            assert tree_score(chart, tree) == pytest.approx(expected, abs=1e-12)

    def test_linearity_over_disjoint_span_sets(self):
        vocab = LabelVocabulary.default()
        chart = random_chart(6, vocab, np.random.default_rng(3))
        a = ProsodicTree(6, [LabeledSpan(0, 2, GeneralizedLabel.of(PW))])
        b = ProsodicTree(6, [LabeledSpan(2, 6, GeneralizedLabel.of(PPH))])
        both = ProsodicTree(6, list(a.spans) + list(b.spans))
        assert tree_score(chart, both) == pytest.approx(
            tree_score(chart, a) + tree_score(chart, b), abs=1e-12)

    def test_span_outside_chart_rejected(self):
        vocab = LabelVocabulary.default()
        chart = random_chart(3, vocab, np.random.default_rng(4))
        tree = ProsodicTree(5, [LabeledSpan(0, 5, GeneralizedLabel.of(PW, PPH, IPH))])
        with pytest.raises(ValueError):
            tree_score(chart, tree)


class TestGradientsThroughScorer:
    def test_tree_score_grad_check_full_stack(self):
        vocab = LabelVocabulary.default()
        char_vocab = CharVocab(list("abc"))
        config = EncoderConfig(vocab_size=char_vocab.size, d_model=8, n_blocks=1,
                               n_heads=2, d_ff=12, max_len=16)
        rng = np.random.default_rng(5)
        enc_params = init_encoder_params(config, rng)
        scorer = ScorerParams.initialize(8, 10, len(vocab) - 1, rng)
        chars = CharSequence("abc")
        tree = sequence_to_tree(parse_line("ab#1c#3"))
        params = dict(enc_params)
        params.update(scorer.named())

        def f(p):
            from prosotree.autodiff import select_sum
            enc = encode(chars, p, config, char_vocab)
            starts, ends, scores = score_spans(enc, scorer)
            rows, cols, weights = [], [], []
            lookup = {(int(i), int(j)): r for r, (i, j) in enumerate(zip(starts, ends))}
            for span in tree.spans:
                rows.append(lookup[(span.i, span.j)])
                cols.append(vocab.nondummy_column(vocab.index_of(span.label)))
                weights.append(1.0)
            return select_sum(scores, rows, cols, weights)

        err = grad_check(f, params, h=1e-5)
        assert err < 1e-3
