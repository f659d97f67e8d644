"""Figure rendering for the reporting paths (train, eval, bench).

Figures are written to files next to the delimited text output; nothing
here opens a window (Agg backend).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .core import ProsodicLevel  # noqa: E402
from .metrics import EvalReport  # noqa: E402
from .trainer import TrainLogRow  # noqa: E402

__all__ = ["save_training_curves", "save_eval_bars", "save_bench_plot"]


def save_training_curves(rows: list[TrainLogRow], path: str | Path) -> None:
    """Loss and per-level dev F1 across epochs."""
    epochs = [r.epoch for r in rows]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.mean_loss for r in rows], marker="o", color="tab:red")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean hinge loss")
    ax_loss.set_title("training loss")
    for name, series, color in (
        ("PW", [r.pw_f1 for r in rows], "tab:blue"),
        ("PPH", [r.pph_f1 for r in rows], "tab:orange"),
        ("IPH", [r.iph_f1 for r in rows], "tab:green"),
    ):
        ax_f1.plot(epochs, series, marker=".", label=name, color=color)
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("dev F1")
    ax_f1.set_ylim(0.0, 1.05)
    ax_f1.set_title("dev boundary F1")
    ax_f1.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_bars(report: EvalReport, path: str | Path) -> None:
    """Grouped precision/recall/F1 bars, one group per level."""
    levels = list(ProsodicLevel)
    x = range(len(levels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for offset, (name, pick) in enumerate(
        (("precision", lambda s: s.precision), ("recall", lambda s: s.recall), ("F1", lambda s: s.f1))
    ):
        values = [pick(report.levels[lv]) for lv in levels]
        ax.bar([xi + (offset - 1) * width for xi in x], values, width, label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels([lv.name for lv in levels])
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"boundary scores ({report.n_sentences} sentences, "
                 f"exact match {report.exact_match:.3f})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_plot(lengths: list[int], medians: list[float], path: str | Path) -> None:
    """Median decode time against length, log-log, with a cubic reference."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(lengths, medians, marker="o", label="measured")
    if len(lengths) >= 2 and medians[0] > 0:
        ref = [medians[0] * (n / lengths[0]) ** 3 for n in lengths]
        ax.loglog(lengths, ref, linestyle="--", label="cubic reference")
    ax.set_xlabel("sentence length n")
    ax.set_ylabel("median decode seconds")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
