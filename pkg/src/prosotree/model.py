"""The trained artifact: encoder plus scorer weights and both vocabularies.

ModelParams bundles everything prediction needs, owns checkpointing (binary
tensor container plus text manifest), and provides the end-to-end pipeline:
encode, score all spans, exact decode, repair, boundary marks.  Only
characters go in; no segmentation or part-of-speech features exist anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint
from .autodiff import Tensor
from .core import (
    BoundarySequence,
    CharSequence,
    GeneralizedLabel,
    LabelVocabulary,
    ProsodicTree,
    repair_tree,
    tree_to_sequence,
)
from .decoder import DecodeResult, decode
from .encoder import (
    CharVocab,
    EncoderConfig,
    EncodedSentence,
    encode,
    external_embedding_table,
    init_encoder_params,
    load_embedding_file,
)
from .scorer import ScoreChart, ScorerParams, chart_from_scores, score_spans

__all__ = ["ModelConfig", "ModelParams", "MANIFEST_SUFFIX"]

MANIFEST_SUFFIX = ".manifest"
FORMAT_VERSION = 1


@dataclass
class ModelConfig:
    """Architecture settings; the vocabulary sizes come from the data."""

    d_model: int = 64
    n_blocks: int = 2
    n_heads: int = 4
    d_ff: int = 128
    d_hidden: int = 128
    max_len: int = 256
    embedding_source: str = "learned"
    embedding_file: str = ""
    dropout: float = 0.0


class ModelParams:
    """All trainable tensors plus the vocabularies they are indexed by."""

    def __init__(
        self,
        config: ModelConfig,
        char_vocab: CharVocab,
        label_vocab: LabelVocabulary,
        encoder_params: dict[str, Tensor],
        scorer_params: ScorerParams,
        external_table: Tensor | None = None,
    ):
        self.config = config
        self.char_vocab = char_vocab
        self.label_vocab = label_vocab
        self.encoder_params = encoder_params
        self.scorer_params = scorer_params
        self.external_table = external_table
        self.encoder_config = EncoderConfig(
            vocab_size=char_vocab.size,
            d_model=config.d_model,
            n_blocks=config.n_blocks,
            n_heads=config.n_heads,
            d_ff=config.d_ff,
            max_len=config.max_len,
            embedding_source=config.embedding_source,
            dropout=config.dropout,
        )

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        corpus_chars,
        rng: np.random.Generator,
        label_vocab: LabelVocabulary | None = None,
    ) -> ModelParams:
        """Fresh seeded parameters.

        With learned embeddings the character vocabulary comes from the
        training sentences; with an external embedding file it comes from
        the file's entries.
        """
        label_vocab = label_vocab or LabelVocabulary.default()
        external_table = None
        if config.embedding_source == "external-file":
            if not config.embedding_file:
                raise ValueError("embedding_source is external-file but embedding_file is unset")
            chars, vectors = load_embedding_file(config.embedding_file)
            if vectors.shape[1] != config.d_model:
                raise ValueError(
                    f"embedding file width {vectors.shape[1]} != d_model {config.d_model}"
                )
            char_vocab = CharVocab(chars)
            external_table = external_embedding_table(chars, vectors, char_vocab)
        else:
            char_vocab = CharVocab.from_corpus(corpus_chars) if not isinstance(corpus_chars, CharVocab) else corpus_chars
        enc_cfg = EncoderConfig(
            vocab_size=char_vocab.size,
            d_model=config.d_model,
            n_blocks=config.n_blocks,
            n_heads=config.n_heads,
            d_ff=config.d_ff,
            max_len=config.max_len,
            embedding_source=config.embedding_source,
            dropout=config.dropout,
        )
        encoder_params = init_encoder_params(enc_cfg, rng)
        scorer_params = ScorerParams.initialize(
            config.d_model, config.d_hidden, len(label_vocab) - 1, rng
        )
        return cls(config, char_vocab, label_vocab, encoder_params, scorer_params, external_table)

    # -- parameter plumbing -------------------------------------------------

    def named_tensors(self) -> dict[str, Tensor]:
        """Every trainable tensor, stable order."""
        out = dict(self.encoder_params)
        out.update(self.scorer_params.named())
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_tensors().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, t in self.named_tensors().items():
            t.data[...] = snap[name]

    # -- forward passes ------------------------------------------------------

    def encode(self, chars: CharSequence) -> EncodedSentence:
        return encode(chars, self.encoder_params, self.encoder_config, self.char_vocab,
                      self.external_table)

    def forward_spans(self, chars: CharSequence):
        """(starts, ends, scores tensor, chart): the training-facing forward."""
        enc = self.encode(chars)
        starts, ends, scores = score_spans(enc, self.scorer_params)
        chart = chart_from_scores(enc.n, self.label_vocab, starts, ends, scores.data)
        return starts, ends, scores, chart

    def score_chart(self, chars: CharSequence) -> ScoreChart:
        _, _, _, chart = self.forward_spans(chars)
        return chart

    def predict_tree(self, chars: CharSequence) -> tuple[ProsodicTree, DecodeResult]:
        """Decode and repair: the returned tree always validates."""
        result = decode(self.score_chart(chars))
        return repair_tree(result.tree), result

    def predict_sequence(self, chars: CharSequence) -> BoundarySequence:
        tree, _ = self.predict_tree(chars)
        return tree_to_sequence(tree, chars)

    # -- checkpointing -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tensors = {name: t.data for name, t in self.named_tensors().items()}
        if self.external_table is not None:
            tensors["embed.external"] = self.external_table.data
        checkpoint.save_tensors(path, tensors)
        manifest = {
            "format_version": FORMAT_VERSION,
            "d_model": self.config.d_model,
            "n_blocks": self.config.n_blocks,
            "n_heads": self.config.n_heads,
            "d_ff": self.config.d_ff,
            "d_hidden": self.config.d_hidden,
            "max_len": self.config.max_len,
            "embedding_source": self.config.embedding_source,
            "dropout": self.config.dropout,
            "vocab_chars": "".join(self.char_vocab.chars),
            "labels": [lab.text() for lab in self.label_vocab],
        }
        checkpoint.save_manifest(path.with_name(path.name + MANIFEST_SUFFIX), manifest)

    @classmethod
    def load(cls, path: str | Path) -> ModelParams:
        path = Path(path)
        manifest = checkpoint.load_manifest(path.with_name(path.name + MANIFEST_SUFFIX))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')}")
        arrays = checkpoint.load_tensors(path)
        config = ModelConfig(
            d_model=int(manifest["d_model"]),
            n_blocks=int(manifest["n_blocks"]),
            n_heads=int(manifest["n_heads"]),
            d_ff=int(manifest["d_ff"]),
            d_hidden=int(manifest["d_hidden"]),
            max_len=int(manifest["max_len"]),
            embedding_source=str(manifest["embedding_source"]),
            dropout=float(manifest["dropout"]),
        )
        char_vocab = CharVocab(tuple(str(manifest["vocab_chars"])))
        label_vocab = LabelVocabulary([GeneralizedLabel.parse(t) for t in manifest["labels"]])
        external = arrays.pop("embed.external", None)
        external_table = Tensor(external, name="embed.external") if external is not None else None
        scorer_params = ScorerParams(
            w1=Tensor(arrays.pop("scorer.w1"), requires_grad=True, name="scorer.w1"),
            z1=Tensor(arrays.pop("scorer.z1"), requires_grad=True, name="scorer.z1"),
            w2=Tensor(arrays.pop("scorer.w2"), requires_grad=True, name="scorer.w2"),
            z2=Tensor(arrays.pop("scorer.z2"), requires_grad=True, name="scorer.z2"),
        )
        encoder_params = {name: Tensor(arr, requires_grad=True, name=name) for name, arr in arrays.items()}
        return cls(config, char_vocab, label_vocab, encoder_params, scorer_params, external_table)
