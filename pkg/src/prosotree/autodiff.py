"""Reverse-mode automatic differentiation over dense float64 arrays.

Small by design: the handful of operations needed by the encoder and the
span scorer, each recording a closed-form backward rule on an implicit tape
(the graph of Tensor nodes).  numpy supplies the array arithmetic; all
gradient logic lives here.  No broadcasting beyond the row-vector bias add,
and shapes are checked eagerly so mismatches fail at the call site.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "relu",
    "softmax_rows",
    "layer_norm",
    "embed_lookup",
    "concat",
    "slice_rows",
    "slice_cols",
    "transpose",
    "reshape",
    "sum_all",
    "select_sum",
    "backward",
    "zero_grads",
    "grad_check",
    "GradCheckError",
]

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A float64 ndarray plus the bookkeeping for reverse-mode gradients."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


def _wire(out: Tensor, parents: Sequence[Tensor], bw: Callable[[np.ndarray], None]) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = bw
    return out


def _as2d(x: Tensor, op: str) -> None:
    if x.data.ndim != 2:
        raise ValueError(f"{op} expects a 2-d tensor, got shape {x.shape}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """a @ b, or a @ b.T with transpose_b (saves materializing the transpose)."""
    _as2d(a, "matmul")
    _as2d(b, "matmul")
    inner = b.shape[1] if transpose_b else b.shape[0]
    if a.shape[1] != inner:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}"
                         + (" (transposed)" if transpose_b else ""))
    out = Tensor(a.data @ b.data.T if transpose_b else a.data @ b.data)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g @ b.data if transpose_b else g @ b.data.T)
        if b.requires_grad:
            b.accumulate(g.T @ a.data if transpose_b else a.data.T @ g)

    return _wire(out, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may also be a row vector added to every row of a."""
    row_bias = a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]
    if not row_bias and a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = Tensor(a.data + b.data)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0) if row_bias else g)

    return _wire(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} - {b.shape}")
    out = Tensor(a.data - b.data)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    return _wire(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = Tensor(a.data * b.data)

    def bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            b.accumulate(g * a.data)

    return _wire(out, (a, b), bw)


def scale(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c)

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(g * c)

    return _wire(out, (x,), bw)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0.0  # subgradient 0 at the kink

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(g * mask)

    return _wire(out, (x,), bw)


def softmax_rows(x: Tensor) -> Tensor:
    _as2d(x, "softmax_rows")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _wire(out, (x,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row of x to zero mean and unit variance, then scale."""
    _as2d(x, "layer_norm")
    d = x.shape[1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError(f"layer_norm gain/bias must have shape ({d},), got {gain.shape}/{bias.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data)

    def bw(g: np.ndarray) -> None:
        if gain.requires_grad:
            gain.accumulate((g * xhat).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=0))
        if x.requires_grad:
            gh = g * gain.data
            x.accumulate(
                inv * (gh - gh.mean(axis=1, keepdims=True) - xhat * (gh * xhat).mean(axis=1, keepdims=True))
            )

    return _wire(out, (x, gain, bias), bw)


def embed_lookup(table: Tensor, indices) -> Tensor:
    """Gather rows of a 2-d table; gradients scatter-add back."""
    _as2d(table, "embed_lookup")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ValueError(f"embed_lookup expects 1-d indices, got shape {idx.shape}")
    out = Tensor(table.data[idx])

    def bw(g: np.ndarray) -> None:
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx, g)
            table.accumulate(gt)

    return _wire(out, (table,), bw)


def concat(parts: Iterable[Tensor], axis: int = 1) -> Tensor:
    parts = list(parts)
    if axis not in (0, 1):
        raise ValueError("concat supports axis 0 or 1")
    for p in parts:
        _as2d(p, "concat")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]

    def bw(g: np.ndarray) -> None:
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                sl = (slice(offset, offset + size), slice(None)) if axis == 0 else (slice(None), slice(offset, offset + size))
                p.accumulate(g[sl])
            offset += size

    return _wire(out, tuple(parts), bw)


def slice_rows(x: Tensor, lo: int, hi: int) -> Tensor:
    _as2d(x, "slice_rows")
    if not (0 <= lo < hi <= x.shape[0]):
        raise ValueError(f"slice_rows [{lo}:{hi}] out of range for shape {x.shape}")
    out = Tensor(x.data[lo:hi])

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[lo:hi] = g
            x.accumulate(gx)

    return _wire(out, (x,), bw)


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    _as2d(x, "slice_cols")
    if not (0 <= lo < hi <= x.shape[1]):
        raise ValueError(f"slice_cols [{lo}:{hi}] out of range for shape {x.shape}")
    out = Tensor(x.data[:, lo:hi])

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[:, lo:hi] = g
            x.accumulate(gx)

    return _wire(out, (x,), bw)


def transpose(x: Tensor) -> Tensor:
    _as2d(x, "transpose")
    out = Tensor(x.data.T.copy())

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(g.T)

    return _wire(out, (x,), bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape))

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(g.reshape(x.data.shape))

    return _wire(out, (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g)))

    return _wire(out, (x,), bw)


def select_sum(x: Tensor, rows, cols, weights) -> Tensor:
    """Weighted sum of selected entries: sum_k w[k] * x[rows[k], cols[k]].

    Repeated coordinates are allowed and their weights accumulate.
    """
    _as2d(x, "select_sum")
    r = np.asarray(rows, dtype=np.intp)
    c = np.asarray(cols, dtype=np.intp)
    w = np.asarray(weights, dtype=np.float64)
    if not (r.shape == c.shape == w.shape):
        raise ValueError(f"select_sum index/weight shapes differ: {r.shape}/{c.shape}/{w.shape}")
    out = Tensor((x.data[r, c] * w).sum())

    def bw(g: np.ndarray) -> None:
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, (r, c), w * float(g))
            x.accumulate(gx)

    return _wire(out, (x,), bw)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def backward(out: Tensor, seed: float = 1.0) -> None:
    """Accumulate gradients of `out` into every reachable requires_grad leaf.

    Nodes are visited exactly once, in reverse topological order, so shared
    inputs receive the sum of all their downstream contributions.
    """
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    out.accumulate(np.full(out.data.shape, seed, dtype=np.float64))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

class GradCheckError(RuntimeError):
    pass


def _param_items(params) -> list[tuple[str, Tensor]]:
    if isinstance(params, Mapping):
        return [(name, t) for name, t in params.items()]
    return [(t.name or f"param{k}", t) for k, t in enumerate(params)]


def grad_check(
    f: Callable[..., Tensor],
    params,
    h: float = 1e-5,
    tol: float | None = None,
    sample_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare tape gradients of the scalar f(params) to central differences.

    Returns the maximum over checked coordinates of
    |g_fd - g_bp| / max(1, |g_fd|, |g_bp|).  When `tol` is given, exceeding
    it raises GradCheckError naming the worst coordinate.  Large tensors can
    be spot-checked with `sample_per_tensor`; the default checks everything.
    Non-finite values abort with the offending coordinate.
    """
    items = _param_items(params)
    zero_grads(t for _, t in items)
    out = f(params)
    if out.data.shape != ():
        raise ValueError(f"grad_check needs a scalar-valued f, got shape {out.data.shape}")
    if not np.isfinite(out.data):
        raise GradCheckError("f(params) is not finite at the base point")
    backward(out)
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for name, t in items}

    worst = 0.0
    worst_coord = ""
    for name, t in items:
        size = t.data.size
        if sample_per_tensor is not None and size > sample_per_tensor:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(size, size=sample_per_tensor, replace=False)
        else:
            coords = range(size)
        flat = t.data.reshape(-1)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            with no_grad():
                up = float(f(params).data)
            flat[k] = orig - h
            with no_grad():
                down = float(f(params).data)
            flat[k] = orig
            g_fd = (up - down) / (2.0 * h)
            g_bp = float(analytic[name].reshape(-1)[k])
            if not (np.isfinite(g_fd) and np.isfinite(g_bp)):
                raise GradCheckError(f"non-finite gradient at {name}[{k}]: fd={g_fd}, tape={g_bp}")
            rel = abs(g_fd - g_bp) / max(1.0, abs(g_fd), abs(g_bp))
            if rel > worst:
                worst = rel
                worst_coord = f"{name}[{k}]"
    if tol is not None and worst > tol:
        raise GradCheckError(f"max relative error {worst:.3e} at {worst_coord} exceeds tol {tol:.1e}")
    return worst
