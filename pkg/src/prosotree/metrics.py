"""Boundary precision/recall/F1 per prosodic level, plus exact tree match.

Counting is cumulative by default: a #3 gap is a positive for IPH, PPH and
PW alike, because a higher boundary implies every lower one.  This matters
for comparability, so it is called out here and the exact-mark alternative
(each gap counts only for its literal level) is available behind a flag.
The forced sentence-final #3 is excluded from all counts; it carries no
information.  Scores are micro-averaged over the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import BoundarySequence, ProsodicLevel

__all__ = ["LevelScore", "EvalReport", "evaluate", "render_report", "report_lines"]


@dataclass(frozen=True)
class LevelScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class EvalReport:
    levels: dict[ProsodicLevel, LevelScore]
    exact_match: float
    n_sentences: int


def _positive(mark: ProsodicLevel | None, level: ProsodicLevel, exact_marks: bool) -> bool:
    if mark is None:
        return False
    return mark == level if exact_marks else mark >= level


def evaluate(
    pred: Sequence[BoundarySequence],
    gold: Sequence[BoundarySequence],
    exact_marks: bool = False,
) -> EvalReport:
    """Micro-averaged boundary scores over aligned prediction/gold lists."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions for {len(gold)} gold sentences")
    counts = {level: [0, 0, 0] for level in ProsodicLevel}  # tp, fp, fn
    exact = 0
    for idx, (p, g) in enumerate(zip(pred, gold)):
        if p.n != g.n:
            raise ValueError(f"sentence {idx}: prediction has {p.n} characters, gold has {g.n}")
        if p.marks == g.marks:
            exact += 1
        for k in range(p.n - 1):  # final gap excluded
            for level in ProsodicLevel:
                pp = _positive(p.marks[k], level, exact_marks)
                gp = _positive(g.marks[k], level, exact_marks)
                if pp and gp:
                    counts[level][0] += 1
                elif pp:
                    counts[level][1] += 1
                elif gp:
                    counts[level][2] += 1
    return EvalReport(
        levels={level: LevelScore(*counts[level]) for level in ProsodicLevel},
        exact_match=exact / len(gold) if gold else 0.0,
        n_sentences=len(gold),
    )


def render_report(report: EvalReport) -> str:
    """Aligned table of per-level scores followed by machine-readable lines."""
    rows = [f"{'level':<6}  {'Pre':>8}  {'Rec':>8}  {'F1':>8}  {'tp':>7}  {'fp':>7}  {'fn':>7}"]
    for level in ProsodicLevel:
        s = report.levels[level]
        rows.append(
            f"{level.name:<6}  {s.precision:>8.4f}  {s.recall:>8.4f}  {s.f1:>8.4f}"
            f"  {s.tp:>7d}  {s.fp:>7d}  {s.fn:>7d}"
        )
    rows.append(f"exact_match {report.exact_match:.4f} over {report.n_sentences} sentences")
    rows.append("")
    rows.extend(report_lines(report))
    return "\n".join(rows)


def report_lines(report: EvalReport) -> list[str]:
    """key = value lines, one metric per line."""
    lines = []
    for level in ProsodicLevel:
        s = report.levels[level]
        name = level.name.lower()
        lines.append(f"{name}_precision = {s.precision:.6f}")
        lines.append(f"{name}_recall = {s.recall:.6f}")
        lines.append(f"{name}_f1 = {s.f1:.6f}")
    lines.append(f"exact_match = {report.exact_match:.6f}")
    lines.append(f"n_sentences = {report.n_sentences}")
    return lines
