"""Max-margin training.

Each step decodes the loss-augmented chart to find the most-violating tree;
the hinge is that tree's augmented score minus the gold score, clipped at
zero.  Its subgradient flows +1 through the chart entries of the violating
derivation and -1 through the gold spans (shared spans cancel, dummy nodes
are pinned and carry nothing), then back through the scorer and encoder.
Batch gradients average over the batch with zero-loss examples counted in
the denominator.  Early stopping watches a dev metric (dev PPH F1 by
default, the hardest of the three levels) and the best checkpoint is kept.
Deterministic for a fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, backward, select_sum, zero_grads
from .core import CharSequence, LabeledSpan, ProsodicTree, tree_to_sequence, validate_tree
from .decoder import decode_augmented
from .metrics import EvalReport, ProsodicLevel, evaluate
from .model import ModelConfig, ModelParams
from .scorer import ScoreChart, tree_score

__all__ = [
    "TrainConfig",
    "TrainLogRow",
    "TrainResult",
    "TrainingDivergence",
    "hinge_loss",
    "LossContext",
    "forward_loss",
    "loss_gradient",
    "train",
    "SGDMomentum",
    "AdamStyle",
    "make_optimizer",
    "clip_gradients",
    "write_training_log",
]

OPTIMIZERS = ("sgd-momentum", "adam-style")
EARLY_STOP_METRICS = ("pw_f1", "pph_f1", "iph_f1", "exact_match")


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    optimizer: str = "adam-style"
    batch_size: int = 16
    max_epochs: int = 60
    patience: int = 5
    seed: int = 0
    grad_clip_norm: float = 5.0
    early_stop_metric: str = "pph_f1"

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.early_stop_metric not in EARLY_STOP_METRICS:
            raise ValueError(f"early_stop_metric must be one of {EARLY_STOP_METRICS}")


@dataclass
class TrainLogRow:
    epoch: int
    mean_loss: float
    pw_f1: float
    pph_f1: float
    iph_f1: float
    seconds: float

    def line(self) -> str:
        return (f"{self.epoch}, {self.mean_loss:.6f}, {self.pw_f1:.6f}, "
                f"{self.pph_f1:.6f}, {self.iph_f1:.6f}, {self.seconds:.2f}")


@dataclass
class TrainResult:
    model: ModelParams
    log: list[TrainLogRow]
    best_epoch: int
    best_metric: float


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def hinge_loss(chart: ScoreChart, gold: ProsodicTree) -> tuple[float, tuple[LabeledSpan, ...], tuple[LabeledSpan, ...]]:
    """max(0, augmented best score - gold score), with both derivations.

    Zero exactly when every margin constraint holds at the augmented argmax.
    """
    augmented = decode_augmented(chart, gold)
    gold_score = tree_score(chart, gold)
    loss = max(0.0, augmented.score - gold_score)
    return loss, augmented.derivation, tuple(gold.sorted_spans())


@dataclass
class LossContext:
    """Everything the gradient needs from one forward pass."""

    loss: float
    scores: Tensor  # (n_spans, L-1), on the tape
    n: int
    pred_derivation: tuple[LabeledSpan, ...]
    gold_spans: tuple[LabeledSpan, ...]
    chart: ScoreChart


def _span_row(n: int, i: int, j: int) -> int:
    # row of span (i, j) in the canonical lexicographic enumeration
    return i * n - (i * (i - 1)) // 2 + (j - i - 1)


def forward_loss(model: ModelParams, chars: CharSequence, gold: ProsodicTree) -> LossContext:
    starts, ends, scores, chart = model.forward_spans(chars)
    loss, pred_deriv, gold_spans = hinge_loss(chart, gold)
    return LossContext(loss=loss, scores=scores, n=chart.n,
                       pred_derivation=pred_deriv, gold_spans=gold_spans, chart=chart)


def _margin_objective(ctx: LossContext, vocab) -> Tensor:
    """s(pred) - s(gold) as a tape scalar over the span score matrix."""
    rows: list[int] = []
    cols: list[int] = []
    weights: list[float] = []
    for span in ctx.pred_derivation:
        if span.label.is_dummy:
            continue  # pinned to zero, no gradient
        rows.append(_span_row(ctx.n, span.i, span.j))
        cols.append(vocab.nondummy_column(vocab.index_of(span.label)))
        weights.append(1.0)
    for span in ctx.gold_spans:
        rows.append(_span_row(ctx.n, span.i, span.j))
        cols.append(vocab.nondummy_column(vocab.index_of(span.label)))
        weights.append(-1.0)
    return select_sum(ctx.scores, rows, cols, weights)


def loss_gradient(ctx: LossContext, model: ModelParams) -> dict[str, np.ndarray]:
    """Subgradient of the hinge for one example, keyed by tensor name.

    Zero loss yields zero gradients; any non-finite gradient aborts.
    """
    params = model.named_tensors()
    if ctx.loss <= 0.0:
        return {name: np.zeros_like(t.data) for name, t in params.items()}
    zero_grads(params.values())
    backward(_margin_objective(ctx, model.label_vocab))
    grads: dict[str, np.ndarray] = {}
    for name, t in params.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence(f"non-finite gradient in {name}")
        grads[name] = g.copy()
    return grads


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class SGDMomentum:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, Tensor], grads: dict[str, np.ndarray]) -> None:
        for name, t in tensors.items():
            v = self.velocity.get(name)
            v = grads[name] if v is None else self.momentum * v + grads[name]
            self.velocity[name] = v
            t.data -= self.lr * v


class AdamStyle:
    def __init__(self, lr: float, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, Tensor], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, tensor in tensors.items():
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.b1 * m + (1 - self.b1) * g
            v = self.b2 * v + (1 - self.b2) * g * g
            self.m[name], self.v[name] = m, v
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            tensor.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd-momentum":
        return SGDMomentum(config.learning_rate)
    return AdamStyle(config.learning_rate)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place to the global norm cap; returns the norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _dev_metric(report: EvalReport, name: str) -> float:
    if name == "exact_match":
        return report.exact_match
    level = {"pw_f1": ProsodicLevel.PW, "pph_f1": ProsodicLevel.PPH, "iph_f1": ProsodicLevel.IPH}[name]
    return report.levels[level].f1


def evaluate_model(model: ModelParams, data) -> EvalReport:
    """Predict every sentence and score against the gold trees."""
    preds = [model.predict_sequence(chars) for chars, _ in data]
    golds = [tree_to_sequence(tree, chars) for chars, tree in data]
    return evaluate(preds, golds)


def train(
    train_data: list[tuple[CharSequence, ProsodicTree]],
    dev_data: list[tuple[CharSequence, ProsodicTree]],
    config: TrainConfig,
    model_config: ModelConfig | None = None,
    model: ModelParams | None = None,
) -> TrainResult:
    """Mini-batch subgradient training with early stopping on dev scores.

    A fresh model is initialized from model_config unless one is passed in.
    Deterministic for a fixed config.seed (single-threaded).
    """
    if not train_data:
        raise ValueError("empty training corpus")
    for idx, (_, gold) in enumerate(train_data):
        report = validate_tree(gold)
        if not report.ok:
            raise ValueError(f"training sentence {idx} invalid: {report.violations[0]}")

    rng = np.random.default_rng(config.seed)
    if model is None:
        model = ModelParams.initialize(model_config or ModelConfig(),
                                       [chars for chars, _ in train_data], rng)
    tensors = model.named_tensors()
    optimizer = make_optimizer(config)

    log: list[TrainLogRow] = []
    best_metric = -1.0
    best_epoch = 0
    best_snap = model.snapshot()
    stall = 0

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_data))
        losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            zero_grads(tensors.values())
            for idx in batch:
                chars, gold = train_data[int(idx)]
                ctx = forward_loss(model, chars, gold)
                losses.append(ctx.loss)
                if ctx.loss > 0.0:
                    backward(_margin_objective(ctx, model.label_vocab))
            grads = {}
            for name, t in tensors.items():
                g = t.grad if t.grad is not None else np.zeros_like(t.data)
                grads[name] = g / len(batch)
            clip_gradients(grads, config.grad_clip_norm)
            optimizer.step(tensors, grads)
            for name, t in tensors.items():
                if not np.all(np.isfinite(t.data)):
                    step_no = start // config.batch_size
                    raise TrainingDivergence(
                        f"non-finite parameter {name} at epoch {epoch}, step {step_no}")
        mean_loss = float(np.mean(losses)) if losses else 0.0
        report = evaluate_model(model, dev_data)
        row = TrainLogRow(
            epoch=epoch,
            mean_loss=mean_loss,
            pw_f1=report.levels[ProsodicLevel.PW].f1,
            pph_f1=report.levels[ProsodicLevel.PPH].f1,
            iph_f1=report.levels[ProsodicLevel.IPH].f1,
            seconds=time.perf_counter() - t0,
        )
        log.append(row)
        metric = _dev_metric(report, config.early_stop_metric)
        if metric > best_metric + 1e-12:
            best_metric = metric
            best_epoch = epoch
            best_snap = model.snapshot()
            stall = 0
        else:
            stall += 1
        if report.exact_match >= 1.0:
            break  # nothing left to improve on dev
        if stall >= config.patience:
            break

    model.restore(best_snap)
    return TrainResult(model=model, log=log, best_epoch=best_epoch, best_metric=best_metric)


def write_training_log(rows: list[TrainLogRow], path: str | Path) -> None:
    lines = ["# epoch, mean_loss, dev_PW_F1, dev_PPH_F1, dev_IPH_F1, seconds"]
    lines.extend(row.line() for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
