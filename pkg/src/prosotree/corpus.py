"""Corpus loading and the seeded synthetic generator.

The synthetic grammar samples a tree skeleton top-down (1-4 intonational
phrases, each of 1-3 prosodic phrases, each of 1-3 prosodic words of 1-4
characters) and fills it with filler characters.  With probability
cue_strength, the character just before a boundary is replaced by that
level's cue character, so at strength 1 every boundary is recoverable from
the characters alone and graded difficulty is a single knob.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    BoundarySequence,
    CharSequence,
    ProsodicLevel,
    ProsodicTree,
    format_line,
    parse_line,
    sequence_to_tree,
)

__all__ = ["LoadReport", "load_corpus", "SynthConfig", "generate", "write_corpus", "corpus_stats"]


@dataclass
class LoadReport:
    n_loaded: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        lines = [f"loaded {self.n_loaded} sentences, {len(self.errors)} rejected"]
        for lineno, message in self.errors:
            lines.append(f"  line {lineno}: {message}")
        return "\n".join(lines)


def load_corpus(path: str | Path) -> tuple[list[tuple[CharSequence, ProsodicTree]], LoadReport]:
    """Parse a line-format corpus file; bad lines are reported, not fatal."""
    report = LoadReport()
    items: list[tuple[CharSequence, ProsodicTree]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            try:
                seq = parse_line(line)
            except ValueError as exc:
                report.errors.append((lineno, str(exc)))
                continue
            items.append((seq.chars, sequence_to_tree(seq)))
            report.n_loaded += 1
    return items, report


@dataclass
class SynthConfig:
    seed: int = 0
    n_sentences: int = 100
    filler_chars: str = "abcdefgh"
    cue_pw: str = "x"
    cue_pph: str = "y"
    cue_iph: str = "z"
    iph_per_sentence: tuple[int, int] = (1, 4)
    pph_per_iph: tuple[int, int] = (1, 3)
    pw_per_pph: tuple[int, int] = (1, 3)
    chars_per_pw: tuple[int, int] = (1, 4)
    cue_strength: float = 1.0

    def __post_init__(self) -> None:
        if not self.filler_chars:
            raise ValueError("filler_chars must not be empty")
        if not (0.0 <= self.cue_strength <= 1.0):
            raise ValueError("cue_strength must lie in [0, 1]")
        cues = {self.cue_pw, self.cue_pph, self.cue_iph}
        if len(cues) != 3 or cues & set(self.filler_chars):
            raise ValueError("cue characters must be three distinct non-filler characters")

    def cue_for(self, level: ProsodicLevel) -> str:
        return {ProsodicLevel.PW: self.cue_pw,
                ProsodicLevel.PPH: self.cue_pph,
                ProsodicLevel.IPH: self.cue_iph}[level]


def _sample_marks(config: SynthConfig, rng: np.random.Generator) -> list[ProsodicLevel | None]:
    def count(bounds: tuple[int, int]) -> int:
        return int(rng.integers(bounds[0], bounds[1] + 1))

    marks: list[ProsodicLevel | None] = []
    for _ in range(count(config.iph_per_sentence)):
        for _ in range(count(config.pph_per_iph)):
            for _ in range(count(config.pw_per_pph)):
                marks.extend([None] * (count(config.chars_per_pw) - 1))
                marks.append(ProsodicLevel.PW)
            marks[-1] = ProsodicLevel.PPH
        marks[-1] = ProsodicLevel.IPH
    return marks


def generate(config: SynthConfig) -> list[BoundarySequence]:
    """Sample the corpus; byte-identical across runs for a fixed seed."""
    rng = np.random.default_rng(config.seed)
    fillers = list(config.filler_chars)
    out: list[BoundarySequence] = []
    for _ in range(config.n_sentences):
        marks = _sample_marks(config, rng)
        chars: list[str] = []
        for mark in marks:
            if mark is not None and rng.random() < config.cue_strength:
                chars.append(config.cue_for(mark))
            else:
                chars.append(fillers[int(rng.integers(len(fillers)))])
        out.append(BoundarySequence(CharSequence(chars), marks))
    return out


def write_corpus(sentences: list[BoundarySequence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sentences:
            fh.write(format_line(seq) + "\n")


def corpus_stats(sentences: list[BoundarySequence]) -> dict[str, float | int]:
    """Sentence and constituent counts in the usual dataset-card style."""
    lengths = [seq.n for seq in sentences]
    counts = {level: 0 for level in ProsodicLevel}
    for seq in sentences:
        for span in sequence_to_tree(seq).spans:
            for level in span.label.levels:
                counts[level] += 1
    return {
        "S_num": len(sentences),
        "S_max": max(lengths) if lengths else 0,
        "S_ave": float(np.mean(lengths)) if lengths else 0.0,
        "PW_num": counts[ProsodicLevel.PW],
        "PPH_num": counts[ProsodicLevel.PPH],
        "IPH_num": counts[ProsodicLevel.IPH],
    }
