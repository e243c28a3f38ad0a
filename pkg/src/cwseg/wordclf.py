"""Binary word-vs-nonword classifier sharing the CWS encoder: max-pool over
positions, one linear unit, and the logistic loss log(1 + exp(-y*s)).  The
score s is pre-sigmoid; the logistic link lives entirely in the loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoder import (
    EncodeCache,
    EncoderGrads,
    EncoderParams,
    Vocab,
    encode_backward,
    encode_cached,
)
from .numkit import Matrix, glorot_scale, init_uniform


@dataclass
class ClfHead:
    """Linear scorer on the max-pooled encoder output."""

    u: Matrix    # (F,)
    c: Matrix    # (1,); scalar bias kept as an array for the optimizer


def init_clf_head(hidden_size: int, rng: np.random.Generator) -> ClfHead:
    return ClfHead(
        init_uniform((hidden_size,), glorot_scale(hidden_size, 1), rng),
        np.zeros(1),
    )


@dataclass(frozen=True)
class WordSample:
    """A candidate word labeled +1 (dictionary word) or -1 (non-word)."""

    chars: str
    label: int

    def __post_init__(self) -> None:
        if not self.chars:
            raise ValueError("word sample must be non-empty")
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


@dataclass
class WordCache:
    encoder: EncodeCache
    pooled: Matrix           # (F,) per-column maxima
    argmax_rows: np.ndarray  # (F,) row feeding each pooled column


def score_word_cached(
    chars: str,
    vocab: Vocab,
    params: EncoderParams,
    head: ClfHead,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[float, WordCache]:
    """s = u . maxpool(encode(chars)) + c, with the cache for the backward.

    Ties in the max-pool resolve to the first (lowest-index) row.
    """
    if not chars:
        raise ValueError("cannot score an empty character sequence")
    hidden, cache = encode_cached(
        chars, vocab, params, dropout=dropout, rng=rng, training=training
    )
    argmax_rows = hidden.argmax(axis=0)
    pooled = hidden[argmax_rows, np.arange(hidden.shape[1])]
    s = float(head.u @ pooled + head.c[0])
    return s, WordCache(cache, pooled, argmax_rows)


def score_word(
    chars: str,
    vocab: Vocab,
    params: EncoderParams,
    head: ClfHead,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> float:
    return score_word_cached(
        chars, vocab, params, head, dropout=dropout, rng=rng, training=training
    )[0]


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def clf_loss(s: float, label: int) -> float:
    """log(1 + exp(-label*s)) via a stable softplus."""
    if label not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {label}")
    z = -label * s
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def clf_backward(
    cache: WordCache | None,
    s: float,
    label: int,
    params: EncoderParams,
    head: ClfHead,
) -> tuple[Matrix, Matrix, EncoderGrads]:
    """(du, dc, encoder grads) for one sample.

    dL/ds = -label * sigmoid(-label*s); the pooled path routes each
    column's gradient to its argmax row only, so projection parameters
    never receive gradient through this branch.
    """
    if cache is None:
        raise ValueError("clf_backward requires the forward cache")
    g = -label * _sigmoid(-label * s)
    du = g * cache.pooled
    dc = np.array([g])
    f = cache.pooled.shape[0]
    d_hidden = np.zeros_like(cache.encoder.hidden)
    d_hidden[cache.argmax_rows, np.arange(f)] = g * head.u
    return du, dc, encode_backward(cache.encoder, d_hidden, params)
