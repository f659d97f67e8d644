"""Tree/sequence conversions, validation, repair, Hamming distance."""

import numpy as np
import pytest

from prosotree.core import (
    DUMMY,
    BoundarySequence,
    CharSequence,
    GeneralizedLabel,
    LabeledSpan,
    ProsodicLevel,
    ProsodicTree,
    binarize_derivation,
    format_line,
    hamming_delta,
    parse_line,
    repair_tree,
    sequence_to_tree,
    text_to_tree,
    tree_to_sequence,
    tree_to_text,
    validate_tree,
)

PW, PPH, IPH = ProsodicLevel.PW, ProsodicLevel.PPH, ProsodicLevel.IPH


def lab(*levels):
    return GeneralizedLabel.of(*levels)


def spans_of(tree):
    return {(s.i, s.j, s.label) for s in tree.spans}


def random_marks(rng, n):
    """Any mark assignment with a final #3 is a well-formed sequence."""
    choices = [None, PW, PPH, IPH]
    marks = [choices[int(rng.integers(4))] for _ in range(n - 1)]
    marks.append(IPH)
    return marks


def random_sequence(rng, n):
    chars = CharSequence([chr(ord("a") + int(rng.integers(26))) for _ in range(n)])
    return BoundarySequence(chars, random_marks(rng, n))


class TestSequenceToTree:
    def test_whole_sentence_single_constituent(self):
        seq = BoundarySequence(CharSequence("ab"), (None, IPH))
        tree = sequence_to_tree(seq)
        assert spans_of(tree) == {(0, 2, lab(PW, PPH, IPH))}

    def test_two_words_under_coextensive_phrase(self):
        seq = BoundarySequence(CharSequence("abcd"), (None, PW, None, IPH))
        tree = sequence_to_tree(seq)
        assert spans_of(tree) == {
            (0, 2, lab(PW)),
            (2, 4, lab(PW)),
            (0, 4, lab(PPH, IPH)),
        }

    def test_three_level_example(self):
        # hand-applied run partition per level, coextensive spans merged
        seq = BoundarySequence(CharSequence("abcdef"), (None, PW, None, PPH, None, IPH))
        tree = sequence_to_tree(seq)
        assert spans_of(tree) == {
            (0, 2, lab(PW)),
            (2, 4, lab(PW)),
            (0, 4, lab(PPH)),
            (4, 6, lab(PW, PPH)),
            (0, 6, lab(IPH)),
        }

    def test_rejects_empty_and_wrong_length(self):
        with pytest.raises(ValueError):
            BoundarySequence(CharSequence(""), ())
        with pytest.raises(ValueError):
            BoundarySequence(CharSequence("ab"), (IPH,))


class TestTreeToSequence:
    def test_inverse_of_simple_cases(self):
        tree = ProsodicTree(2, [LabeledSpan(0, 2, lab(PW, PPH, IPH))])
        seq = tree_to_sequence(tree, CharSequence("ab"))
        assert seq.marks == (None, IPH)

        tree = ProsodicTree(4, [
            LabeledSpan(0, 2, lab(PW)), LabeledSpan(2, 4, lab(PW)),
            LabeledSpan(0, 4, lab(PPH, IPH)),
        ])
        assert tree_to_sequence(tree, CharSequence("abcd")).marks == (None, PW, None, IPH)

    def test_highest_level_retained_at_shared_end(self):
        # at fencepost 4 both a PW and a PPH end; the PPH mark wins
        tree = ProsodicTree(6, [
            LabeledSpan(0, 2, lab(PW)), LabeledSpan(2, 4, lab(PW)),
            LabeledSpan(0, 4, lab(PPH)), LabeledSpan(4, 6, lab(PW, PPH)),
            LabeledSpan(0, 6, lab(IPH)),
        ])
        assert tree_to_sequence(tree, CharSequence("abcdef")).marks == (None, PW, None, PPH, None, IPH)

    def test_rejects_invalid_tree(self):
        broken = ProsodicTree(4, [LabeledSpan(0, 3, lab(PW)), LabeledSpan(2, 4, lab(PW))])
        with pytest.raises(ValueError):
            tree_to_sequence(broken, CharSequence("abcd"))


class TestRoundTrips:
    def test_sequence_tree_sequence_thousand_random(self):
        rng = np.random.default_rng(20240811)
        for _ in range(1000):
            n = int(rng.integers(1, 41))
            seq = random_sequence(rng, n)
            back = tree_to_sequence(sequence_to_tree(seq), seq.chars)
            assert back.marks == seq.marks
            assert format_line(back) == format_line(seq)

    def test_tree_sequence_tree(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = int(rng.integers(1, 30))
            tree = sequence_to_tree(random_sequence(rng, n))
            again = sequence_to_tree(tree_to_sequence(tree, CharSequence("a" * n)))
            assert tree.spans == again.spans

    def test_sequence_to_tree_always_validates(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            tree = sequence_to_tree(random_sequence(rng, int(rng.integers(1, 25))))
            assert validate_tree(tree).ok


class TestValidateTree:
    def test_valid_single_span(self):
        assert validate_tree(ProsodicTree(2, [LabeledSpan(0, 2, lab(PW, PPH, IPH))])).ok

    def test_crossing_spans_rejected(self):
        report = validate_tree(ProsodicTree(4, [
            LabeledSpan(0, 3, lab(PW)), LabeledSpan(2, 4, lab(PW)),
            LabeledSpan(0, 4, lab(PPH, IPH)),
        ]))
        assert not report.ok
        assert any("overlap" in v for v in report.violations)

    def test_duplicate_extent_rejected(self):
        report = validate_tree(ProsodicTree(2, [
            LabeledSpan(0, 2, lab(PW)), LabeledSpan(0, 2, lab(PPH, IPH)),
        ]))
        assert not report.ok
        assert any("duplicate extent" in v for v in report.violations)

    def test_missing_level_rejected(self):
        report = validate_tree(ProsodicTree(4, [
            LabeledSpan(0, 2, lab(PW)), LabeledSpan(2, 4, lab(PW)),
        ]))
        assert not report.ok
        assert any("PPH" in v for v in report.violations)

    def test_containment_violation_rejected(self):
        # PPH partition holds but the PW-within-PPH extent check fails
        report = validate_tree(ProsodicTree(4, [
            LabeledSpan(0, 4, lab(PW, IPH)),
            LabeledSpan(0, 2, lab(PPH)), LabeledSpan(2, 4, lab(PPH)),
        ]))
        assert not report.ok

    def test_non_contiguous_label_flagged(self):
        report = validate_tree(ProsodicTree(2, [LabeledSpan(0, 2, lab(PW, IPH))]))
        assert not report.ok
        assert any("non-contiguous" in v for v in report.violations)


class TestRepairTree:
    def test_identity_on_valid_trees(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            tree = sequence_to_tree(random_sequence(rng, int(rng.integers(1, 25))))
            assert repair_tree(tree).spans == tree.spans

    def test_root_promotion(self):
        raw = ProsodicTree(4, [LabeledSpan(0, 2, lab(PW)), LabeledSpan(2, 4, lab(PW))])
        fixed = repair_tree(raw)
        assert spans_of(fixed) == {
            (0, 2, lab(PW)), (2, 4, lab(PW)), (0, 4, lab(PPH, IPH)),
        }

    def test_wraps_uncovered_chars_and_widens_upward(self):
        raw = ProsodicTree(4, [LabeledSpan(0, 4, lab(IPH)), LabeledSpan(0, 2, lab(PW))])
        fixed = repair_tree(raw)
        assert spans_of(fixed) == {
            (0, 4, lab(IPH, PPH)), (0, 2, lab(PW)), (2, 4, lab(PW)),
        }

    def test_output_always_validates_and_idempotent(self):
        rng = np.random.default_rng(11)
        labels = [lab(PW), lab(PPH), lab(IPH), lab(PW, PPH), lab(PW, PPH, IPH), lab(PPH, IPH)]
        for _ in range(300):
            n = int(rng.integers(1, 15))
            # arbitrary non-crossing random span sets
            spans = []
            taken = set()
            for _ in range(int(rng.integers(0, 6))):
                i = int(rng.integers(0, n))
                j = int(rng.integers(i + 1, n + 1))
                crossing = any(a < i < b < j or i < a < j < b for a, b in taken)
                if (i, j) in taken or crossing:
                    continue
                taken.add((i, j))
                spans.append(LabeledSpan(i, j, labels[int(rng.integers(len(labels)))]))
            fixed = repair_tree(ProsodicTree(n, spans))
            assert validate_tree(fixed).ok
            assert repair_tree(fixed).spans == fixed.spans


class TestHammingDelta:
    def golden(self):
        seq = BoundarySequence(CharSequence("abcd"), (None, PW, None, IPH))
        return sequence_to_tree(seq)

    def test_zero_on_own_derivation(self):
        gold = self.golden()
        assert hamming_delta(binarize_derivation(gold), gold) == 0

    def test_one_differing_span(self):
        gold = self.golden()
        deriv = list(binarize_derivation(gold))
        for k, span in enumerate(deriv):
            if span.label == lab(PW):
                deriv[k] = LabeledSpan(span.i, span.j, lab(PPH))
                break
        assert hamming_delta(deriv, gold) == 1

    def test_matches_bruteforce_count(self):
        rng = np.random.default_rng(5)
        labels = [DUMMY, lab(PW), lab(PPH), lab(IPH)]
        for _ in range(100):
            gold = sequence_to_tree(random_sequence(rng, 4))
            deriv = [
                LabeledSpan(i, j, labels[int(rng.integers(4))])
                for i in range(4) for j in range(i + 1, 5)
            ]
            gold_map = {(s.i, s.j): s.label for s in gold.spans}
            expect = sum(
                1 for s in deriv if s.label != gold_map.get((s.i, s.j), DUMMY)
            )
            assert hamming_delta(deriv, gold) == expect

    def test_mismatched_length_rejected(self):
        gold = self.golden()
        with pytest.raises(ValueError):
            hamming_delta([LabeledSpan(0, 9, lab(PW))], gold)


class TestBinarize:
    def test_span_count_is_2n_minus_1(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            tree = sequence_to_tree(random_sequence(rng, n))
            assert len(binarize_derivation(tree)) == 2 * n - 1

    def test_contains_tree_spans_with_labels(self):
        rng = np.random.default_rng(29)
        tree = sequence_to_tree(random_sequence(rng, 12))
        deriv = binarize_derivation(tree)
        as_set = {(s.i, s.j, s.label) for s in deriv}
        for span in tree.spans:
            assert (span.i, span.j, span.label) in as_set


class TestLineFormat:
    def test_basic_parse(self):
        seq = parse_line("ab#1cd#3")
        assert seq.chars.text() == "abcd"
        assert seq.marks == (None, PW, None, IPH)

    def test_missing_final_mark_normalized(self):
        assert format_line(parse_line("ab#1cd")) == "ab#1cd#3"

    def test_low_final_mark_raised(self):
        assert format_line(parse_line("ab#1cd#1")) == "ab#1cd#3"

    def test_leading_boundary_rejected(self):
        with pytest.raises(ValueError, match="before any character"):
            parse_line("#1ab")

    def test_double_boundary_rejected(self):
        with pytest.raises(ValueError, match="consecutive"):
            parse_line("ab#1#2cd")

    def test_malformed_boundary_rejected(self):
        with pytest.raises(ValueError, match="malformed"):
            parse_line("ab#x")

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            parse_line("   ")

    def test_whitespace_ignored(self):
        assert format_line(parse_line("a b #1 cd #3")) == "ab#1cd#3"


class TestTreeText:
    def test_round_trip(self):
        rng = np.random.default_rng(37)
        for _ in range(200):
            seq = random_sequence(rng, int(rng.integers(1, 20)))
            tree = sequence_to_tree(seq)
            text = tree_to_text(tree, seq.chars)
            chars, back = text_to_tree(text)
            assert chars == seq.chars
            assert back.spans == tree.spans

    def test_renders_nested_brackets(self):
        seq = parse_line("ab#1cd#2ef#3")
        text = tree_to_text(sequence_to_tree(seq), seq.chars)
        assert text == "(#3 (#2 (#1 a b) (#1 c d)) (#2-#1 e f))"

    def test_escaping(self):
        seq = BoundarySequence(CharSequence(["(", ")", "\\"]), (None, None, IPH))
        tree = sequence_to_tree(seq)
        chars, back = text_to_tree(tree_to_text(tree, seq.chars))
        assert chars == seq.chars
        assert back.spans == tree.spans
