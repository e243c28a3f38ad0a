"""Character encoder: embedding lookup, multi-width 1-D convolutions with
boundary padding, per-tag emission projection, and exact hand-derived
backward passes for all of it.

The convolution window at position i spans [i - ceil((k-1)/2),
i + floor((k-1)/2)]; even kernels therefore reach one step further left.
Out-of-range slots read the trainable PAD embedding row, so the output
always keeps one row per input character.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .numkit import Matrix, dropout_apply, glorot_scale, init_uniform, relu

PAD_INDEX = 0
UNK_INDEX = 1
NUM_RESERVED = 2


class Vocab:
    """Bidirectional character/index map with reserved PAD=0 and UNK=1."""

    def __init__(self, chars: Iterable[str] = ()) -> None:
        self._chars: list[str] = []
        self._index: dict[str, int] = {}
        for ch in chars:
            self.add(ch)

    def add(self, ch: str) -> int:
        """Register a character (idempotent) and return its index."""
        if len(ch) != 1:
            raise ValueError(f"vocab entries are single characters, got {ch!r}")
        idx = self._index.get(ch)
        if idx is None:
            idx = len(self._chars) + NUM_RESERVED
            self._index[ch] = idx
            self._chars.append(ch)
        return idx

    def index(self, ch: str) -> int:
        return self._index.get(ch, UNK_INDEX)

    def char(self, idx: int) -> str:
        if idx < NUM_RESERVED:
            raise ValueError(f"index {idx} is reserved")
        return self._chars[idx - NUM_RESERVED]

    def indices(self, chars: Sequence[str]) -> np.ndarray:
        return np.fromiter(
            (self.index(c) for c in chars), dtype=np.int64, count=len(chars)
        )

    @property
    def chars(self) -> tuple[str, ...]:
        """Non-reserved characters in index order (index = position + 2)."""
        return tuple(self._chars)

    def __contains__(self, ch: str) -> bool:
        return ch in self._index

    def __len__(self) -> int:
        return len(self._chars) + NUM_RESERVED

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        """Collect characters in order of first appearance."""
        vocab = cls()
        for sentence in sentences:
            for word in sentence:
                for ch in word:
                    vocab.add(ch)
        return vocab


@dataclass
class EncoderParams:
    """All encoder weights.

    ``conv_w[k]`` holds n_k filters of width k as rows of length k*D, so a
    filter response is one dot product against the flattened window.
    """

    embedding: Matrix            # (V, D)
    conv_w: dict[int, Matrix]    # kernel size k -> (n_k, k*D)
    conv_b: dict[int, Matrix]    # kernel size k -> (n_k,)
    proj_w: Matrix               # (F, T)
    proj_b: Matrix               # (T,)

    @property
    def kernel_sizes(self) -> tuple[int, ...]:
        return tuple(sorted(self.conv_w))

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden_size(self) -> int:
        return sum(w.shape[0] for w in self.conv_w.values())

    @property
    def num_tags(self) -> int:
        return self.proj_b.shape[0]

    @property
    def filter_counts(self) -> dict[int, int]:
        return {k: self.conv_w[k].shape[0] for k in self.kernel_sizes}


@dataclass
class EncoderGrads:
    """Gradient arrays mirroring EncoderParams."""

    embedding: Matrix
    conv_w: dict[int, Matrix]
    conv_b: dict[int, Matrix]
    proj_w: Matrix
    proj_b: Matrix

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "EncoderGrads":
        return cls(
            np.zeros_like(params.embedding),
            {k: np.zeros_like(w) for k, w in params.conv_w.items()},
            {k: np.zeros_like(b) for k, b in params.conv_b.items()},
            np.zeros_like(params.proj_w),
            np.zeros_like(params.proj_b),
        )


def init_encoder_params(
    vocab_size: int,
    embed_dim: int,
    filter_counts: Mapping[int, int],
    num_tags: int,
    rng: np.random.Generator,
) -> EncoderParams:
    """Glorot-uniform weights and zero biases; the draw order is fixed so a
    seeded rng always reproduces the same parameters."""
    embedding = init_uniform(
        (vocab_size, embed_dim), glorot_scale(vocab_size, embed_dim), rng
    )
    conv_w: dict[int, Matrix] = {}
    conv_b: dict[int, Matrix] = {}
    for k in sorted(filter_counts):
        n_k = filter_counts[k]
        if k < 1 or n_k < 1:
            raise ValueError(f"bad filter spec: {n_k} filters of width {k}")
        conv_w[k] = init_uniform(
            (n_k, k * embed_dim), glorot_scale(k * embed_dim, n_k), rng
        )
        conv_b[k] = np.zeros(n_k)
    hidden = sum(filter_counts.values())
    proj_w = init_uniform((hidden, num_tags), glorot_scale(hidden, num_tags), rng)
    proj_b = np.zeros(num_tags)
    return EncoderParams(embedding, conv_w, conv_b, proj_w, proj_b)


@dataclass
class EncodeCache:
    """Activations recorded by the forward pass, consumed by the backward."""

    indices: np.ndarray                   # (M,) vocab rows per position
    emb_mask: Matrix                      # (M, D) scaled dropout mask
    windows: dict[int, Matrix]            # k -> (M, k*D) conv inputs
    window_rows: dict[int, np.ndarray]    # k -> (M, k) rows into padded emb
    pad_left: dict[int, int]              # k -> left pad row count
    pre_act: dict[int, Matrix]            # k -> (M, n_k) before ReLU
    hidden_mask: Matrix                   # (M, F) scaled dropout mask
    hidden: Matrix                        # (M, F) post-ReLU, post-dropout


def embed(chars: Sequence[str], vocab: Vocab, params: EncoderParams) -> Matrix:
    """Embedding rows for each character; unseen characters use the UNK row."""
    return params.embedding[vocab.indices(chars)]


def conv_windows(
    emb: Matrix, k: int, pad_row: Matrix
) -> tuple[Matrix, np.ndarray, int]:
    """Stack each position's width-k context window.

    Returns (windows (M, k*D), gather rows (M, k), left pad count).
    """
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    m, d = emb.shape
    left = k // 2            # ceil((k-1)/2)
    right = (k - 1) // 2     # floor((k-1)/2)
    padded = np.empty((m + k - 1, d))
    padded[:left] = pad_row
    padded[left:left + m] = emb
    padded[left + m:] = pad_row
    rows = np.arange(m)[:, None] + np.arange(k)[None, :]
    windows = padded[rows.reshape(-1)].reshape(m, k * d)
    return windows, rows, left


def conv_forward(
    emb: Matrix, k: int, weights: Matrix, bias: Matrix, pad_row: Matrix
) -> Matrix:
    """ReLU(w . window + b) at every position; output keeps M rows."""
    windows, _, _ = conv_windows(emb, k, pad_row)
    return relu(windows @ weights.T + bias)


def encode_cached(
    chars: Sequence[str],
    vocab: Vocab,
    params: EncoderParams,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[Matrix, EncodeCache]:
    """Full encoder forward: (hidden (M, F), cache).

    Dropout is applied to the embedding output and to the concatenated
    convolution output; the PAD row used for boundary slots stays
    undropped since it is structure, not input.
    """
    indices = vocab.indices(chars)
    emb = params.embedding[indices]
    emb, emb_mask = dropout_apply(emb, dropout, rng, training)
    pad_row = params.embedding[PAD_INDEX]
    windows: dict[int, Matrix] = {}
    window_rows: dict[int, np.ndarray] = {}
    pad_left: dict[int, int] = {}
    pre_act: dict[int, Matrix] = {}
    outputs = []
    for k in params.kernel_sizes:
        win, rows, left = conv_windows(emb, k, pad_row)
        pre = win @ params.conv_w[k].T + params.conv_b[k]
        windows[k] = win
        window_rows[k] = rows
        pad_left[k] = left
        pre_act[k] = pre
        outputs.append(relu(pre))
    hidden = np.concatenate(outputs, axis=1)
    hidden, hidden_mask = dropout_apply(hidden, dropout, rng, training)
    cache = EncodeCache(
        indices, emb_mask, windows, window_rows, pad_left, pre_act,
        hidden_mask, hidden,
    )
    return hidden, cache


def encode(
    chars: Sequence[str],
    vocab: Vocab,
    params: EncoderParams,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Matrix:
    return encode_cached(
        chars, vocab, params, dropout=dropout, rng=rng, training=training
    )[0]


def emission_scores(hidden: Matrix, params: EncoderParams) -> Matrix:
    """Per-position tag scores: row i = W^T h_i + b."""
    return hidden @ params.proj_w + params.proj_b


def encode_backward(
    cache: EncodeCache | None, d_hidden: Matrix, params: EncoderParams
) -> EncoderGrads:
    """Gradients w.r.t. embedding and conv parameters given the gradient at
    the (post-dropout) encoder output.

    Projection gradients in the result stay zero; encoder_backward adds
    them.  The ReLU subgradient uses pre-activation > 0, and embedding-row
    gradients accumulate over repeated characters and PAD slots alike.
    """
    if cache is None:
        raise ValueError("encode_backward requires the forward cache")
    grads = EncoderGrads.zeros_like(params)
    d_hidden = d_hidden * cache.hidden_mask
    m = cache.indices.shape[0]
    d = params.embed_dim
    d_emb_rows = np.zeros((m, d))
    d_pad = np.zeros(d)
    col = 0
    for k in params.kernel_sizes:
        n_k = params.conv_w[k].shape[0]
        d_pre = d_hidden[:, col:col + n_k] * (cache.pre_act[k] > 0)
        col += n_k
        grads.conv_w[k][...] = d_pre.T @ cache.windows[k]
        grads.conv_b[k][...] = d_pre.sum(axis=0)
        d_win = (d_pre @ params.conv_w[k]).reshape(m * k, d)
        d_padded = np.zeros((m + k - 1, d))
        np.add.at(d_padded, cache.window_rows[k].reshape(-1), d_win)
        left = cache.pad_left[k]
        d_emb_rows += d_padded[left:left + m]
        d_pad += d_padded[:left].sum(axis=0) + d_padded[left + m:].sum(axis=0)
    d_emb_rows *= cache.emb_mask
    np.add.at(grads.embedding, cache.indices, d_emb_rows)
    grads.embedding[PAD_INDEX] += d_pad
    return grads


def encoder_backward(
    cache: EncodeCache | None, d_scores: Matrix, params: EncoderParams
) -> EncoderGrads:
    """Full backward from emission-score gradients to every encoder parameter."""
    if cache is None:
        raise ValueError("encoder_backward requires the forward cache")
    d_hidden = d_scores @ params.proj_w.T
    grads = encode_backward(cache, d_hidden, params)
    grads.proj_w[...] = cache.hidden.T @ d_scores
    grads.proj_b[...] = d_scores.sum(axis=0)
    return grads


def load_word2vec_text(path) -> tuple[int, dict[str, np.ndarray]]:
    """Parse word2vec text format: a "count dim" header, then one entry per
    line (token followed by dim floats).  Only single-character tokens are
    kept; multi-character entries are skipped."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("embeddings header must be '<count> <dim>'")
        try:
            dim = int(header[1])
            int(header[0])
        except ValueError as exc:
            raise ValueError(f"bad embeddings header: {' '.join(header)!r}") from exc
        if dim < 1:
            raise ValueError(f"embedding dimension must be positive, got {dim}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = [p for p in line.split(" ") if p]
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise ValueError(
                    f"embeddings line {lineno}: expected {dim} values, "
                    f"got {len(values)}"
                )
            if len(token) == 1:
                vectors[token] = np.array([float(v) for v in values])
    return dim, vectors


def apply_pretrained(
    params: EncoderParams, vocab: Vocab, vectors: Mapping[str, np.ndarray]
) -> int:
    """Overwrite embedding rows for covered characters; PAD, UNK and
    uncovered characters keep their random initialization.  Returns the
    number of rows replaced."""
    count = 0
    for ch, vec in vectors.items():
        if vec.shape != (params.embed_dim,):
            raise ValueError(
                f"pretrained vector for {ch!r} has dimension {vec.shape[0]}, "
                f"model uses {params.embed_dim}"
            )
        if ch in vocab:
            params.embedding[vocab.index(ch)] = vec
            count += 1
    return count
