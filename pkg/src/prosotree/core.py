"""Domain types for three-level prosodic structure.

A sentence's prosody is modelled as a tree of nested constituents on three
levels: prosodic words (PW) inside prosodic phrases (PPH) inside intonational
phrases (IPH).  The tree is stored as a set of labeled spans over character
fenceposts; a span that is simultaneously a constituent on several levels
carries a single merged label.  The same structure has a flat, TTS-facing
encoding as per-gap boundary marks (#1 after a PW, #2 after a PPH, #3 after
an IPH), and this module owns the conversions between the two forms, the
structural validator, and the coercive repair applied to raw decoder output.

Fencepost convention: positions 0..n sit between characters, so span (i, j)
covers characters i+1..j (1-based).  The boundary mark after character k
lives at fencepost k.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, Sequence

__all__ = [
    "ProsodicLevel",
    "GeneralizedLabel",
    "DUMMY",
    "LabelVocabulary",
    "LabeledSpan",
    "CharSequence",
    "ProsodicTree",
    "BoundarySequence",
    "ValidationReport",
    "sequence_to_tree",
    "tree_to_sequence",
    "tree_to_marks",
    "validate_tree",
    "repair_tree",
    "hamming_delta",
    "binarize_derivation",
    "parse_line",
    "format_line",
    "tree_to_text",
    "text_to_tree",
]


class ProsodicLevel(IntEnum):
    """Constituent levels, totally ordered PW < PPH < IPH."""

    PW = 1
    PPH = 2
    IPH = 3

    @property
    def mark(self) -> str:
        """The boundary token written after a constituent of this level."""
        return f"#{int(self)}"


_MARK_TO_LEVEL = {lv.mark: lv for lv in ProsodicLevel}


@dataclass(frozen=True)
class GeneralizedLabel:
    """Label naming every constituent level that shares one span extent.

    An empty level set is the dummy label reserved for nodes introduced by
    binarization; it never appears inside a ProsodicTree.
    """

    levels: frozenset[ProsodicLevel] = frozenset()

    def __init__(self, levels: Iterable[ProsodicLevel] = ()) -> None:
        object.__setattr__(self, "levels", frozenset(ProsodicLevel(lv) for lv in levels))

    @classmethod
    def of(cls, *levels: ProsodicLevel) -> GeneralizedLabel:
        return cls(levels)

    @property
    def is_dummy(self) -> bool:
        return not self.levels

    @property
    def highest(self) -> ProsodicLevel:
        if not self.levels:
            raise ValueError("dummy label has no highest level")
        return max(self.levels)

    @property
    def is_contiguous(self) -> bool:
        """True when the level set is a consecutive run (e.g. {PW,PPH})."""
        if not self.levels:
            return True
        vals = sorted(int(lv) for lv in self.levels)
        return vals == list(range(vals[0], vals[-1] + 1))

    def text(self) -> str:
        """Greatest-first text form, e.g. '#2-#1' for a merged PW+PPH."""
        if self.is_dummy:
            return "∅"
        return "-".join(lv.mark for lv in sorted(self.levels, reverse=True))

    @classmethod
    def parse(cls, text: str) -> GeneralizedLabel:
        if text == "∅":
            return DUMMY
        levels = []
        for part in text.split("-"):
            if part not in _MARK_TO_LEVEL:
                raise ValueError(f"unknown label component {part!r} in {text!r}")
            levels.append(_MARK_TO_LEVEL[part])
        return cls(levels)

    def __str__(self) -> str:
        return self.text()


DUMMY = GeneralizedLabel()


class LabelVocabulary:
    """Dense, indexed list of generalized labels with the dummy at a fixed slot.

    The index order is load-bearing: the decoder breaks score ties in favor
    of the lowest label index.
    """

    def __init__(self, labels: Sequence[GeneralizedLabel]):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in vocabulary")
        dummies = [idx for idx, lab in enumerate(labels) if lab.is_dummy]
        if len(dummies) != 1:
            raise ValueError("vocabulary must contain the dummy label exactly once")
        self.labels = labels
        self.dummy_index = dummies[0]
        self._index = {lab: idx for idx, lab in enumerate(labels)}

    @classmethod
    def default(cls) -> LabelVocabulary:
        PW, PPH, IPH = ProsodicLevel.PW, ProsodicLevel.PPH, ProsodicLevel.IPH
        return cls(
            [
                DUMMY,
                GeneralizedLabel.of(PW),
                GeneralizedLabel.of(PPH),
                GeneralizedLabel.of(IPH),
                GeneralizedLabel.of(PW, PPH),
                GeneralizedLabel.of(PW, PPH, IPH),
                GeneralizedLabel.of(PPH, IPH),
            ]
        )

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def index_of(self, label: GeneralizedLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label} not in vocabulary") from None

    def label_at(self, index: int) -> GeneralizedLabel:
        return self.labels[index]

    def nondummy_column(self, index: int) -> int:
        """Column of a non-dummy label in the dummy-free score matrix."""
        if index == self.dummy_index:
            raise ValueError("dummy label has no score column")
        return index - 1 if index > self.dummy_index else index


@dataclass(frozen=True)
class LabeledSpan:
    """One constituent: fencepost extent (i, j) plus its generalized label."""

    i: int
    j: int
    label: GeneralizedLabel

    def __post_init__(self) -> None:
        if not (0 <= self.i < self.j):
            raise ValueError(f"invalid span extent ({self.i}, {self.j})")

    def extent(self) -> tuple[int, int]:
        return (self.i, self.j)

    def __str__(self) -> str:
        return f"({self.i},{self.j},{self.label})"


@dataclass(frozen=True)
class CharSequence:
    """The raw sentence as an ordered tuple of characters."""

    chars: tuple[str, ...]

    def __init__(self, chars: Iterable[str]) -> None:
        object.__setattr__(self, "chars", tuple(chars))

    @classmethod
    def from_text(cls, text: str) -> CharSequence:
        return cls(tuple(text))

    @property
    def n(self) -> int:
        return len(self.chars)

    def __len__(self) -> int:
        return len(self.chars)

    def text(self) -> str:
        return "".join(self.chars)


@dataclass(frozen=True)
class ProsodicTree:
    """A set of non-dummy labeled spans over a sentence of fixed length.

    Construction only enforces well-formed extents; the structural
    invariants (nesting, per-level partition, containment) are checked by
    validate_tree so that raw decoder output can be held in the same type.
    """

    sentence_len: int
    spans: frozenset[LabeledSpan]

    def __init__(self, sentence_len: int, spans: Iterable[LabeledSpan] = ()) -> None:
        if sentence_len < 1:
            raise ValueError("sentence_len must be >= 1")
        spans = frozenset(spans)
        for span in spans:
            if span.label.is_dummy:
                raise ValueError(f"tree span {span} carries the dummy label")
            if span.j > sentence_len:
                raise ValueError(f"span {span} exceeds sentence length {sentence_len}")
        object.__setattr__(self, "sentence_len", sentence_len)
        object.__setattr__(self, "spans", spans)

    def sorted_spans(self) -> list[LabeledSpan]:
        """Spans in outer-first pre-order: by start, widest first."""
        return sorted(self.spans, key=lambda s: (s.i, -s.j))


@dataclass(frozen=True)
class BoundarySequence:
    """Per-gap boundary marks over a sentence; the flat TTS-facing format.

    marks[k] is the boundary after character k+1 (None for no boundary).
    The final mark is always #3: the sentence end closes its last IPH.
    """

    chars: CharSequence
    marks: tuple[Optional[ProsodicLevel], ...]

    def __init__(self, chars: CharSequence, marks: Iterable[Optional[ProsodicLevel]]) -> None:
        marks = tuple(marks)
        if len(chars) < 1:
            raise ValueError("empty sentence")
        if len(marks) != len(chars):
            raise ValueError(f"{len(marks)} marks for {len(chars)} characters")
        if marks[-1] != ProsodicLevel.IPH:
            raise ValueError("final mark must be #3")
        for m in marks:
            if m is not None and not isinstance(m, ProsodicLevel):
                raise ValueError(f"invalid mark {m!r}")
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "marks", marks)

    @property
    def n(self) -> int:
        return len(self.chars)


# ---------------------------------------------------------------------------
# Conversions between trees and boundary sequences
# ---------------------------------------------------------------------------

def _marks_to_tree(n: int, marks: Sequence[Optional[ProsodicLevel]]) -> ProsodicTree:
    """Build the unique tree whose level-l constituents are the maximal runs
    between boundaries of level >= l, merging coextensive constituents."""
    extents: dict[tuple[int, int], set[ProsodicLevel]] = {}
    for level in ProsodicLevel:
        start = 0
        for k in range(1, n + 1):
            m = marks[k - 1]
            if m is not None and m >= level:
                extents.setdefault((start, k), set()).add(level)
                start = k
    spans = [LabeledSpan(i, j, GeneralizedLabel(levels)) for (i, j), levels in extents.items()]
    return ProsodicTree(n, spans)


def sequence_to_tree(seq: BoundarySequence) -> ProsodicTree:
    """Convert boundary marks to the equivalent prosodic tree.

    A #3 mark is simultaneously a PW, PPH and IPH boundary, #2 a PW and PPH
    boundary; each level's constituents are the runs between its boundaries.
    Inverse of tree_to_sequence.
    """
    return _marks_to_tree(seq.n, seq.marks)


def tree_to_marks(tree: ProsodicTree) -> tuple[Optional[ProsodicLevel], ...]:
    """Boundary marks of a valid tree: at each fencepost, the highest level
    among the constituents ending there (None when no constituent ends)."""
    report = validate_tree(tree)
    if not report.ok:
        raise ValueError(f"invalid tree: {report.violations[0]}")
    return _end_marks(tree)


def _end_marks(tree: ProsodicTree) -> tuple[Optional[ProsodicLevel], ...]:
    n = tree.sentence_len
    marks: list[Optional[ProsodicLevel]] = [None] * n
    for span in tree.spans:
        level = span.label.highest
        k = span.j - 1
        if marks[k] is None or level > marks[k]:
            marks[k] = level
    return tuple(marks)


def tree_to_sequence(tree: ProsodicTree, chars: CharSequence) -> BoundarySequence:
    """Render a valid tree as a boundary sequence over its characters."""
    if len(chars) != tree.sentence_len:
        raise ValueError(f"{len(chars)} characters for a tree over {tree.sentence_len}")
    return BoundarySequence(chars, tree_to_marks(tree))


# ---------------------------------------------------------------------------
# Validation and repair
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_tree: pass, or the list of violated invariants."""

    ok: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def validate_tree(tree: ProsodicTree) -> ValidationReport:
    """Check nesting, per-level partition and level containment.

    Always returns a report; never raises.
    """
    n = tree.sentence_len
    spans = tree.sorted_spans()
    violations: list[str] = []

    for span in spans:
        if not span.label.is_contiguous:
            violations.append(f"non-contiguous level set on {span}")

    counts = Counter(s.extent() for s in spans)
    for extent, c in sorted(counts.items()):
        if c > 1:
            violations.append(
                f"duplicate extent {extent}: coextensive levels must merge into one label"
            )

    for a_idx, a in enumerate(spans):
        for b in spans[a_idx + 1:]:
            if a.i < b.i < a.j < b.j:
                violations.append(f"overlap {a}×{b}")

    for level in ProsodicLevel:
        carriers = sorted((s for s in spans if level in s.label.levels), key=lambda s: s.i)
        pos = 0
        broken = False
        for s in carriers:
            if s.i != pos:
                broken = True
                break
            pos = s.j
        if broken or pos != n:
            violations.append(f"level {level.name} does not partition (0,{n})")

    for level, upper in ((ProsodicLevel.PW, ProsodicLevel.PPH), (ProsodicLevel.PPH, ProsodicLevel.IPH)):
        uppers = [s for s in spans if upper in s.label.levels]
        for s in spans:
            if level not in s.label.levels:
                continue
            if not any(u.i <= s.i and s.j <= u.j for u in uppers):
                violations.append(f"{s} lies in no {upper.name} constituent")

    return ValidationReport(ok=not violations, violations=tuple(violations))


def repair_tree(tree: ProsodicTree) -> ProsodicTree:
    """Coerce an arbitrary nested span set into a valid tree.

    Each span votes a boundary at its end fencepost with its highest level,
    the sentence-final fencepost is forced to #3, and the tree is rebuilt
    from the resulting marks.  This wraps uncovered characters into minimal
    PW runs, promotes the root extent to any missing level, and widens
    labels upward where containment was violated.  Idempotent on valid
    trees, and the output always validates.
    """
    n = tree.sentence_len
    marks: list[Optional[ProsodicLevel]] = [None] * n
    for span in tree.spans:
        if span.j > n:
            continue  # never panic on stray decoder spans
        level = span.label.highest
        k = span.j - 1
        if marks[k] is None or level > marks[k]:
            marks[k] = level
    marks[n - 1] = ProsodicLevel.IPH
    return _marks_to_tree(n, marks)


# ---------------------------------------------------------------------------
# Hamming distance and binarization
# ---------------------------------------------------------------------------

def hamming_delta(derivation: Iterable[LabeledSpan], gold: ProsodicTree) -> int:
    """Count derivation spans whose label differs from the gold label.

    The derivation is a full binarized span list (dummy labels included);
    the gold label of an extent absent from the gold tree is the dummy, so
    matching binarization nodes contribute zero.
    """
    gold_labels = {s.extent(): s.label for s in gold.spans}
    delta = 0
    for span in derivation:
        if span.j > gold.sentence_len:
            raise ValueError(f"derivation span {span} outside sentence of length {gold.sentence_len}")
        if span.label != gold_labels.get(span.extent(), DUMMY):
            delta += 1
    return delta


def _containment_children(
    tree: ProsodicTree,
) -> tuple[list[LabeledSpan], dict[LabeledSpan, list[LabeledSpan]]]:
    """Top-level spans and the maximal-children map of a nested span set."""
    spans = tree.sorted_spans()
    top: list[LabeledSpan] = []
    children: dict[LabeledSpan, list[LabeledSpan]] = {s: [] for s in spans}
    stack: list[LabeledSpan] = []
    for span in spans:
        while stack and stack[-1].j <= span.i:
            stack.pop()
        if stack:
            children[stack[-1]].append(span)
        else:
            top.append(span)
        stack.append(span)
    return top, children


def binarize_derivation(tree: ProsodicTree) -> tuple[LabeledSpan, ...]:
    """Right-branching binary derivation of a valid tree: 2n-1 spans, with
    dummy labels on the nodes binarization introduces."""
    report = validate_tree(tree)
    if not report.ok:
        raise ValueError(f"invalid tree: {report.violations[0]}")
    n = tree.sentence_len
    top, children = _containment_children(tree)
    out: list[LabeledSpan] = []

    def emit(i: int, j: int, label: GeneralizedLabel, kids: list[LabeledSpan]) -> None:
        out.append(LabeledSpan(i, j, label))
        if j - i == 1:
            return
        # a node without children is a leaf constituent over several characters
        elems = kids if kids else [LabeledSpan(a, a + 1, DUMMY) for a in range(i, j)]
        combine(j, elems)

    def combine(hi: int, elems: list[LabeledSpan]) -> None:
        # elems partition (elems[0].i, hi) and len(elems) >= 2 on a valid tree
        first = elems[0]
        emit(first.i, first.j, first.label, children.get(first, []))
        rest = elems[1:]
        if len(rest) == 1:
            nxt = rest[0]
            emit(nxt.i, nxt.j, nxt.label, children.get(nxt, []))
        else:
            out.append(LabeledSpan(first.j, hi, DUMMY))
            combine(hi, rest)

    if len(top) == 1 and top[0].extent() == (0, n):
        root = top[0]
        emit(0, n, root.label, children[root])
    else:
        out.append(LabeledSpan(0, n, DUMMY))
        combine(n, top)
    return tuple(out)


# ---------------------------------------------------------------------------
# Line format: characters interleaved with literal #1/#2/#3 tokens
# ---------------------------------------------------------------------------

def parse_line(line: str, normalize_final: bool = True) -> BoundarySequence:
    """Parse one corpus line, e.g. 'ab#1cd#3'.

    Whitespace is ignored.  With normalize_final, a missing or lower-level
    sentence-final mark is raised to #3.
    """
    chars: list[str] = []
    marks: list[Optional[ProsodicLevel]] = []
    idx = 0
    while idx < len(line):
        ch = line[idx]
        if ch.isspace():
            idx += 1
            continue
        if ch == "#":
            if idx + 1 >= len(line) or line[idx + 1] not in "123":
                raise ValueError(f"malformed boundary token at column {idx}")
            if not chars:
                raise ValueError("boundary before any character")
            if marks[-1] is not None:
                raise ValueError(f"consecutive boundary tokens at column {idx}")
            marks[-1] = _MARK_TO_LEVEL["#" + line[idx + 1]]
            idx += 2
            continue
        chars.append(ch)
        marks.append(None)
        idx += 1
    if not chars:
        raise ValueError("empty sentence")
    if marks[-1] != ProsodicLevel.IPH:
        if not normalize_final:
            raise ValueError("final mark must be #3")
        marks[-1] = ProsodicLevel.IPH
    return BoundarySequence(CharSequence(chars), marks)


def format_line(seq: BoundarySequence) -> str:
    """Render a boundary sequence in the corpus line format."""
    parts: list[str] = []
    for ch, mark in zip(seq.chars.chars, seq.marks):
        parts.append(ch)
        if mark is not None:
            parts.append(mark.mark)
    return "".join(parts)


# ---------------------------------------------------------------------------
# Bracketed tree text, e.g. (#3 (#2 (#1 a b) (#1 c d)) (#2-#1 e f))
# ---------------------------------------------------------------------------

_ESCAPED = {"(", ")", "\\"}


def _escape_char(ch: str) -> str:
    if ch in _ESCAPED or ch == "#" or ch.isspace():
        return "\\" + ch
    return ch


def tree_to_text(tree: ProsodicTree, chars: CharSequence) -> str:
    """Render a valid tree as a bracketed expression over its characters."""
    if len(chars) != tree.sentence_len:
        raise ValueError(f"{len(chars)} characters for a tree over {tree.sentence_len}")
    report = validate_tree(tree)
    if not report.ok:
        raise ValueError(f"invalid tree: {report.violations[0]}")
    top, children = _containment_children(tree)

    def render(span: LabeledSpan) -> str:
        kids = children[span]
        if kids:
            inner = " ".join(render(k) for k in kids)
        else:
            inner = " ".join(_escape_char(c) for c in chars.chars[span.i:span.j])
        return f"({span.label.text()} {inner})"

    return " ".join(render(t) for t in top)


def text_to_tree(text: str) -> tuple[CharSequence, ProsodicTree]:
    """Parse a bracketed tree expression back into characters and spans."""
    spans: list[LabeledSpan] = []
    chars: list[str] = []
    # stack entries: (label, start fencepost)
    stack: list[tuple[GeneralizedLabel, int]] = []
    idx = 0
    while idx < len(text):
        ch = text[idx]
        if ch.isspace():
            idx += 1
        elif ch == "(":
            end = idx + 1
            while end < len(text) and not text[end].isspace() and text[end] not in "()":
                end += 1
            label = GeneralizedLabel.parse(text[idx + 1:end])
            if label.is_dummy:
                raise ValueError("dummy label in tree text")
            stack.append((label, len(chars)))
            idx = end
        elif ch == ")":
            if not stack:
                raise ValueError(f"unbalanced ')' at column {idx}")
            label, start = stack.pop()
            if len(chars) == start:
                raise ValueError("empty constituent")
            spans.append(LabeledSpan(start, len(chars), label))
            idx += 1
        elif ch == "\\":
            if idx + 1 >= len(text):
                raise ValueError("dangling escape")
            chars.append(text[idx + 1])
            idx += 2
        else:
            chars.append(ch)
            idx += 1
    if stack:
        raise ValueError("unbalanced '(' in tree text")
    if not chars:
        raise ValueError("empty sentence")
    return CharSequence(chars), ProsodicTree(len(chars), spans)
