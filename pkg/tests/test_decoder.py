"""Decoder correctness against the shape-enumerating brute force."""

import numpy as np
import pytest

from prosotree.core import (
    BoundarySequence,
    CharSequence,
    GeneralizedLabel,
    LabelVocabulary,
    LabeledSpan,
    ProsodicLevel,
    ProsodicTree,
    binarize_derivation,
    hamming_delta,
    sequence_to_tree,
)
from prosotree.decoder import (
    augment_chart,
    brute_force_decode,
    decode,
    decode_augmented,
    derivation_spans,
)
from prosotree.scorer import ScoreChart, random_chart, tree_score

PW, PPH, IPH = ProsodicLevel.PW, ProsodicLevel.PPH, ProsodicLevel.IPH
VOCAB = LabelVocabulary.default()
SMALL_VOCAB = LabelVocabulary([
    GeneralizedLabel(), GeneralizedLabel.of(PW), GeneralizedLabel.of(PPH, IPH),
    GeneralizedLabel.of(PW, PPH, IPH),
])


def random_tree(rng, n):
    choices = [None, PW, PPH, IPH]
    marks = [choices[int(rng.integers(4))] for _ in range(n - 1)] + [IPH]
    return sequence_to_tree(BoundarySequence(CharSequence("a" * n), marks))


def rescore(chart: ScoreChart, derivation) -> float:
    """Canonical-order summation, independent of either search."""
    total = 0.0
    for span in sorted(derivation, key=lambda s: (s.i, s.j)):
        total += float(chart.scores[span.i, span.j, chart.vocab.index_of(span.label)])
    return total


class TestDecodeBasics:
    def test_single_character_uses_best_label(self):
        chart = random_chart(1, VOCAB, np.random.default_rng(0))
        chart.scores[0, 1, 3] = 5.0
        res = decode(chart)
        assert res.score == pytest.approx(5.0)
        assert {(s.i, s.j) for s in res.tree.spans} == {(0, 1)}
        assert next(iter(res.tree.spans)).label == VOCAB.label_at(3)

    def test_all_zero_chart_gives_empty_tree(self):
        chart = ScoreChart(n=4, vocab=VOCAB, scores=np.zeros((5, 5, len(VOCAB))))
        res = decode(chart)
        assert res.score == 0.0
        assert res.tree.spans == frozenset()
        assert all(s.label.is_dummy for s in res.derivation)

    def test_empty_chart_rejected(self):
        with pytest.raises(ValueError):
            decode(ScoreChart(n=0, vocab=VOCAB, scores=np.zeros((1, 1, len(VOCAB)))))

    def test_derivation_has_2n_minus_1_spans(self):
        rng = np.random.default_rng(1)
        for n in (1, 2, 3, 5, 9):
            res = decode(random_chart(n, VOCAB, rng))
            assert len(derivation_spans(res)) == 2 * n - 1

    def test_deterministic_on_identical_charts(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            chart = random_chart(5, VOCAB, rng)
            a = decode(chart)
            b = decode(ScoreChart(n=5, vocab=VOCAB, scores=chart.scores.copy()))
            assert a.derivation == b.derivation

    def test_tie_break_lowest_label_smallest_split(self):
        # constant chart: every label ties, every split ties
        scores = np.zeros((4, 4, len(VOCAB)))
        res = decode(ScoreChart(n=3, vocab=VOCAB, scores=scores))
        assert all(s.label.is_dummy for s in res.derivation)  # label index 0 wins
        root_split = res.table.back_split[0, 3]
        assert root_split == 1  # smallest k wins


class TestOracleEquality:
    def test_decode_matches_brute_force(self):
        rng = np.random.default_rng(20240812)
        for trial in range(200):
            n = int(rng.integers(1, 8))
            vocab = VOCAB if trial % 2 else SMALL_VOCAB
            chart = random_chart(n, vocab, rng)
            res = decode(chart)
            bf = brute_force_decode(chart)
            assert abs(res.score - bf.score) < 1e-9, f"trial {trial}"
            # the returned tree attains the reported optimum
            assert rescore(chart, res.derivation) == pytest.approx(res.score, abs=1e-9)
            # unique optimum: identical-order rescoring agrees exactly
            assert rescore(chart, res.derivation) == rescore(chart, bf.derivation)

    def test_brute_force_derivation_count_n2(self):
        chart = random_chart(2, VOCAB, np.random.default_rng(3))
        bf = brute_force_decode(chart)
        assert bf.n_derivations == len(VOCAB) ** 3  # one shape, L^3 labelings

    def test_brute_force_rejects_large_n(self):
        with pytest.raises(ValueError):
            brute_force_decode(random_chart(9, VOCAB, np.random.default_rng(4)))

    def test_optimality_certificate_random_alternatives(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(2, 10))
            chart = random_chart(n, VOCAB, rng)
            res = decode(chart)
            for _ in range(50):
                alt = random_tree(rng, n)
                assert res.score >= tree_score(chart, alt) - 1e-9


class TestAugmentedDecode:
    def test_gold_returned_when_margin_huge(self):
        # gold labels hugely favored over every alternative: the +1 bonus on
        # disagreeing labels can no longer buy anything, so the most-violating
        # tree is gold itself and the augmented score carries no distance
        rng = np.random.default_rng(6)
        for n in (2, 4, 5, 7):
            gold = random_tree(rng, n)
            chart = random_chart(n, VOCAB, rng)
            for lab in range(len(VOCAB)):
                if lab != VOCAB.dummy_index:
                    chart.scores[..., lab] -= 100.0
            for span in gold.spans:
                chart.scores[span.i, span.j, VOCAB.index_of(span.label)] = 100.0
            res = decode_augmented(chart, gold)
            assert res.tree.spans == gold.spans
            assert res.score == pytest.approx(tree_score(chart, gold))

    def test_zero_chart_violator_has_positive_delta(self):
        gold = ProsodicTree(2, [LabeledSpan(0, 2, GeneralizedLabel.of(PW, PPH, IPH))])
        chart = ScoreChart(n=2, vocab=VOCAB, scores=np.zeros((3, 3, len(VOCAB))))
        res = decode_augmented(chart, gold)
        delta = hamming_delta(res.derivation, gold)
        assert delta >= 1
        assert res.score >= 1.0
        bf = brute_force_decode(chart, augment_gold=gold)
        assert res.score == pytest.approx(bf.score, abs=1e-9)

    def test_matches_brute_force_with_hamming(self):
        rng = np.random.default_rng(20240813)
        for trial in range(200):
            n = int(rng.integers(1, 7))
            chart = random_chart(n, VOCAB, rng)
            gold = random_tree(rng, n)
            res = decode_augmented(chart, gold)
            bf = brute_force_decode(chart, augment_gold=gold)
            assert abs(res.score - bf.score) < 1e-9, f"trial {trial}"
            # returned augmented score really is tree score + Hamming distance
            plain = rescore(chart, res.derivation)
            delta = hamming_delta(res.derivation, gold)
            assert res.score == pytest.approx(plain + delta, abs=1e-9)

    def test_augmented_optimality_against_random_trees(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(2, 9))
            chart = random_chart(n, VOCAB, rng)
            gold = random_tree(rng, n)
            res = decode_augmented(chart, gold)
            for _ in range(20):
                alt = random_tree(rng, n)
                alt_deriv = binarize_derivation(alt)
                alt_value = tree_score(chart, alt) + hamming_delta(alt_deriv, gold)
                assert res.score >= alt_value - 1e-9

    def test_augmentation_covers_dummy_label(self):
        gold = ProsodicTree(2, [LabeledSpan(0, 1, GeneralizedLabel.of(PW)),
                                LabeledSpan(1, 2, GeneralizedLabel.of(PW)),
                                LabeledSpan(0, 2, GeneralizedLabel.of(PPH, IPH))])
        chart = ScoreChart(n=2, vocab=VOCAB, scores=np.zeros((3, 3, len(VOCAB))))
        aug = augment_chart(chart, gold)
        # on gold spans the dummy lost its pin: it now costs +1
        assert aug.scores[0, 1, VOCAB.dummy_index] == 1.0
        assert aug.scores[0, 1, VOCAB.index_of(GeneralizedLabel.of(PW))] == 0.0

    def test_mismatched_length_rejected(self):
        chart = random_chart(3, VOCAB, np.random.default_rng(8))
        gold = random_tree(np.random.default_rng(9), 4)
        with pytest.raises(ValueError):
            decode_augmented(chart, gold)


class TestRuntimeScaling:
    def test_cubic_ish_growth(self):
        import time

        rng = np.random.default_rng(10)
        med = {}
        for n in (40, 80):
            times = []
            for _ in range(20):
                chart = random_chart(n, VOCAB, rng)
                t0 = time.perf_counter()
                decode(chart)
                times.append(time.perf_counter() - t0)
            med[n] = sorted(times)[len(times) // 2]
        ratio = med[80] / med[40]
        assert 4.0 <= ratio <= 16.0, f"ratio {ratio:.2f}"
