"""Context-sensitive character encoder.

Characters are embedded (from a trainable table or an external vector file),
given fixed sinusoidal position codes, and passed through a configurable
stack of self-attention blocks.  Each block is multi-head attention and a
position-wise feed-forward sublayer, each followed by a residual connection
and layer normalization.  Depth 0 is a supported configuration: the output
is then the raw embedding plus position code, which is the ablation used to
measure what the attention stack contributes.

The encoder emits one hidden vector per fencepost, 0..n, with a BOS token
supplying the vector at fencepost 0.  An EOS token is processed for
symmetry but its vector is unused.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat,
    embed_lookup,
    layer_norm,
    matmul,
    relu,
    scale,
    slice_cols,
    slice_rows,
    softmax_rows,
)
from .core import CharSequence

__all__ = ["EncoderConfig", "CharVocab", "EncodedSentence", "init_encoder_params", "encode",
           "sinusoidal_positions", "load_embedding_file"]

EMBEDDING_SOURCES = ("learned", "external-file")


@dataclass
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_blocks: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = 256
    embedding_source: str = "learned"
    dropout: float = 0.0  # accepted for completeness; defaults off and stays off at desk scale

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")
        if self.embedding_source not in EMBEDDING_SOURCES:
            raise ValueError(f"embedding_source must be one of {EMBEDDING_SOURCES}")


class CharVocab:
    """Character-to-index table with reserved UNK/BOS/EOS slots."""

    UNK = 0
    BOS = 1
    EOS = 2
    RESERVED = 3

    def __init__(self, chars: Sequence[str]):
        seen: dict[str, int] = {}
        for ch in chars:
            if ch not in seen:
                seen[ch] = self.RESERVED + len(seen)
        self._index = seen
        self.chars = tuple(seen)

    @classmethod
    def from_corpus(cls, sentences) -> CharVocab:
        chars: list[str] = []
        for sent in sentences:
            chars.extend(sent.chars)
        return cls(sorted(set(chars)))

    @property
    def size(self) -> int:
        return self.RESERVED + len(self.chars)

    def index(self, ch: str) -> int:
        return self._index.get(ch, self.UNK)

    def encode(self, chars: CharSequence) -> np.ndarray:
        """Token ids [BOS, c_1..c_n, EOS]."""
        ids = [self.BOS]
        ids.extend(self.index(ch) for ch in chars.chars)
        ids.append(self.EOS)
        return np.asarray(ids, dtype=np.intp)

    def count_unknown(self, chars: CharSequence) -> int:
        return sum(1 for ch in chars.chars if ch not in self._index)


@dataclass
class EncodedSentence:
    """Fencepost vectors v_0..v_n for a sentence of n characters."""

    fencepost: Tensor  # (n+1, d_model)

    @property
    def n(self) -> int:
        return self.fencepost.shape[0] - 1

    @property
    def d_model(self) -> int:
        return self.fencepost.shape[1]


@lru_cache(maxsize=8)
def sinusoidal_positions(length: int, d_model: int) -> np.ndarray:
    """Fixed sin/cos position codes, one row per token position."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    k = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * k / d_model)
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    table.setflags(write=False)
    return table


def _fan_in_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(rows)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Seeded parameter tensors for the embedding table and every block."""
    d, ff = config.d_model, config.d_ff
    params: dict[str, Tensor] = {}

    def param(name: str, data: np.ndarray) -> None:
        params[name] = Tensor(data, requires_grad=True, name=name)

    if config.embedding_source == "learned":
        param("embed.table", rng.normal(0.0, 0.02, size=(config.vocab_size, d)))
    for b in range(config.n_blocks):
        pre = f"enc{b}"
        for proj in ("wq", "wk", "wv", "wo"):
            param(f"{pre}.attn.{proj}", _fan_in_uniform(rng, d, d))
            param(f"{pre}.attn.{proj[1]}b", np.zeros(d))
        param(f"{pre}.ln1.gain", np.ones(d))
        param(f"{pre}.ln1.bias", np.zeros(d))
        param(f"{pre}.ffn.w1", _fan_in_uniform(rng, d, ff))
        param(f"{pre}.ffn.b1", np.zeros(ff))
        param(f"{pre}.ffn.w2", _fan_in_uniform(rng, ff, d))
        param(f"{pre}.ffn.b2", np.zeros(d))
        param(f"{pre}.ln2.gain", np.ones(d))
        param(f"{pre}.ln2.bias", np.zeros(d))
    return params


def _self_attention(h: Tensor, params: dict[str, Tensor], prefix: str, n_heads: int) -> Tensor:
    d = h.shape[1]
    dh = d // n_heads
    q = add(matmul(h, params[f"{prefix}.wq"]), params[f"{prefix}.qb"])
    k = add(matmul(h, params[f"{prefix}.wk"]), params[f"{prefix}.kb"])
    v = add(matmul(h, params[f"{prefix}.wv"]), params[f"{prefix}.vb"])
    heads = []
    for head in range(n_heads):
        lo, hi = head * dh, (head + 1) * dh
        qh, kh, vh = slice_cols(q, lo, hi), slice_cols(k, lo, hi), slice_cols(v, lo, hi)
        scores = scale(matmul(qh, kh, transpose_b=True), 1.0 / np.sqrt(dh))
        heads.append(matmul(softmax_rows(scores), vh))
    merged = concat(heads, axis=1) if n_heads > 1 else heads[0]
    return add(matmul(merged, params[f"{prefix}.wo"]), params[f"{prefix}.ob"])


def encode(
    chars: CharSequence,
    params: dict[str, Tensor],
    config: EncoderConfig,
    vocab: CharVocab,
    external_table: Tensor | None = None,
) -> EncodedSentence:
    """Run the encoder over one sentence, returning its fencepost vectors.

    Deterministic given params; the result participates in the gradient tape
    whenever the embedding table or block weights are trainable.
    """
    n = len(chars)
    if n < 1:
        raise ValueError("cannot encode an empty sentence")
    if n + 2 > config.max_len:
        raise ValueError(f"sentence of {n} characters exceeds max_len {config.max_len}")
    if config.embedding_source == "learned":
        table = params["embed.table"]
    else:
        if external_table is None:
            raise ValueError("embedding_source is external-file but no table was supplied")
        table = external_table
    if table.shape[0] != vocab.size:
        raise ValueError(f"embedding table has {table.shape[0]} rows for a vocabulary of {vocab.size}")
    if table.shape[1] != config.d_model:
        raise ValueError(f"embedding width {table.shape[1]} != d_model {config.d_model}")

    ids = vocab.encode(chars)
    h = embed_lookup(table, ids)
    pos = sinusoidal_positions(config.max_len, config.d_model)[: n + 2]
    h = add(h, Tensor(pos))
    for b in range(config.n_blocks):
        attn = _self_attention(h, params, f"enc{b}.attn", config.n_heads)
        h = layer_norm(add(h, attn), params[f"enc{b}.ln1.gain"], params[f"enc{b}.ln1.bias"])
        inner = relu(add(matmul(h, params[f"enc{b}.ffn.w1"]), params[f"enc{b}.ffn.b1"]))
        ff = add(matmul(inner, params[f"enc{b}.ffn.w2"]), params[f"enc{b}.ffn.b2"])
        h = layer_norm(add(h, ff), params[f"enc{b}.ln2.gain"], params[f"enc{b}.ln2.bias"])
    return EncodedSentence(fencepost=slice_rows(h, 0, n + 1))


def load_embedding_file(path) -> tuple[list[str], np.ndarray]:
    """Read an external embedding file: 'dim=<d>' header, then one
    'char v1 .. vd' line per vocabulary entry."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"{path}: expected 'dim=<d>' header, got {header!r}")
        dim = int(header[4:])
        chars: list[str] = []
        rows: list[np.ndarray] = []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected 1 character + {dim} floats")
            ch = fields[0]
            if len(ch) != 1:
                raise ValueError(f"{path}:{lineno}: vocabulary entry must be a single character")
            if ch in chars:
                raise ValueError(f"{path}:{lineno}: duplicate entry {ch!r}")
            chars.append(ch)
            rows.append(np.asarray([float(x) for x in fields[1:]]))
    return chars, np.stack(rows) if rows else np.zeros((0, dim))


def external_embedding_table(chars: list[str], vectors: np.ndarray, vocab: CharVocab) -> Tensor:
    """Assemble the frozen lookup table for a vocabulary from file entries.

    Reserved tokens (UNK/BOS/EOS) and characters missing from the file get
    zero rows; position codes still make their fenceposts distinguishable.
    """
    d = vectors.shape[1]
    table = np.zeros((vocab.size, d))
    by_char = {ch: k for k, ch in enumerate(chars)}
    for ch in vocab.chars:
        if ch in by_char:
            table[vocab.index(ch)] = vectors[by_char[ch]]
    return Tensor(table, requires_grad=False, name="embed.external")
