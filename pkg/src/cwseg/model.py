"""Model assembly: vocabulary plus all trainable parameter groups, a stable
named-array view for the optimizer and serializer, and whole-model
segmentation inference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import crf
from .encoder import (
    EncoderGrads,
    EncoderParams,
    Vocab,
    emission_scores,
    encode,
    init_encoder_params,
)
from .tagcodec import NUM_TAGS, tags_to_words
from .wordclf import ClfHead, init_clf_head

DEFAULT_EMBED_DIM = 200
DEFAULT_KERNEL_SIZES = (2, 3, 4, 5)
DEFAULT_TOTAL_FILTERS = 400


def filter_split(total: int, kernel_sizes: Sequence[int]) -> dict[int, int]:
    """Divide a filter budget evenly across kernel sizes."""
    if not kernel_sizes:
        raise ValueError("need at least one kernel size")
    if total < len(kernel_sizes) or total % len(kernel_sizes):
        raise ValueError(
            f"{total} filters do not divide evenly over {len(kernel_sizes)} "
            "kernel sizes"
        )
    each = total // len(kernel_sizes)
    return {int(k): each for k in kernel_sizes}


@dataclass
class Model:
    vocab: Vocab
    encoder: EncoderParams
    transitions: crf.Transitions
    head: ClfHead

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "embedding", self.encoder.embedding
        for k in self.encoder.kernel_sizes:
            yield f"conv_w[{k}]", self.encoder.conv_w[k]
            yield f"conv_b[{k}]", self.encoder.conv_b[k]
        yield "proj_w", self.encoder.proj_w
        yield "proj_b", self.encoder.proj_b
        yield "trans_matrix", self.transitions.matrix
        yield "trans_start", self.transitions.start
        yield "clf_u", self.head.u
        yield "clf_c", self.head.c

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.named_params()}

    def restore(self, snap: Mapping[str, np.ndarray]) -> None:
        for name, arr in self.named_params():
            arr[...] = snap[name]


def init_model(
    vocab: Vocab,
    rng: np.random.Generator,
    *,
    embed_dim: int = DEFAULT_EMBED_DIM,
    filter_counts: Mapping[int, int] | None = None,
    masked: bool = True,
) -> Model:
    if filter_counts is None:
        filter_counts = filter_split(DEFAULT_TOTAL_FILTERS, DEFAULT_KERNEL_SIZES)
    encoder = init_encoder_params(len(vocab), embed_dim, filter_counts, NUM_TAGS, rng)
    transitions = crf.init_transitions(rng, masked=masked)
    head = init_clf_head(encoder.hidden_size, rng)
    return Model(vocab, encoder, transitions, head)


@dataclass
class ModelGrads:
    """One gradient array per trainable parameter, accumulated in place."""

    encoder: EncoderGrads
    trans_matrix: np.ndarray
    trans_start: np.ndarray
    clf_u: np.ndarray
    clf_c: np.ndarray

    @classmethod
    def zeros_like(cls, model: Model) -> "ModelGrads":
        return cls(
            EncoderGrads.zeros_like(model.encoder),
            np.zeros_like(model.transitions.matrix),
            np.zeros_like(model.transitions.start),
            np.zeros_like(model.head.u),
            np.zeros_like(model.head.c),
        )

    def named(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "embedding", self.encoder.embedding
        for k in sorted(self.encoder.conv_w):
            yield f"conv_w[{k}]", self.encoder.conv_w[k]
            yield f"conv_b[{k}]", self.encoder.conv_b[k]
        yield "proj_w", self.encoder.proj_w
        yield "proj_b", self.encoder.proj_b
        yield "trans_matrix", self.trans_matrix
        yield "trans_start", self.trans_start
        yield "clf_u", self.clf_u
        yield "clf_c", self.clf_c

    def add_encoder(self, grads: EncoderGrads, scale: float = 1.0) -> None:
        self.encoder.embedding += scale * grads.embedding
        for k in grads.conv_w:
            self.encoder.conv_w[k] += scale * grads.conv_w[k]
            self.encoder.conv_b[k] += scale * grads.conv_b[k]
        self.encoder.proj_w += scale * grads.proj_w
        self.encoder.proj_b += scale * grads.proj_b

    def add_transitions(
        self, d_matrix: np.ndarray, d_start: np.ndarray, scale: float = 1.0
    ) -> None:
        self.trans_matrix += scale * d_matrix
        self.trans_start += scale * d_start

    def add_head(self, du: np.ndarray, dc: np.ndarray, scale: float = 1.0) -> None:
        self.clf_u += scale * du
        self.clf_c += scale * dc

    def add(self, other: "ModelGrads", scale: float = 1.0) -> None:
        for (_, mine), (_, theirs) in zip(self.named(), other.named()):
            mine += scale * theirs


def segment(model: Model, chars: str) -> list[str]:
    """Viterbi-decode a raw character sequence into words."""
    if not chars:
        return []
    hidden = encode(chars, model.vocab, model.encoder)
    scores = emission_scores(hidden, model.encoder)
    tags = crf.viterbi(scores, model.transitions)
    return tags_to_words(chars, tags)
