"""Independent reference implementations used to pin expected values:
exhaustive CRF path enumeration, central finite differences, and small
model factories shared across test modules.

Nothing here reuses the dynamic-programming or backprop code under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from cwseg.crf import Transitions, init_transitions
from cwseg.encoder import Vocab, init_encoder_params
from cwseg.model import Model, init_model
from cwseg.tagcodec import NUM_TAGS, Tag
from cwseg.wordclf import init_clf_head


# ---------------------------------------------------------------------------
# exhaustive CRF reference


def all_paths(m: int, t: int = NUM_TAGS) -> np.ndarray:
    """Every tag sequence of length m, in lexicographic order, as (t^m, m)."""
    return np.array(
        list(itertools.product(range(t), repeat=m)), dtype=np.int64
    ).reshape(t**m, m)


def enum_path_scores(
    scores: np.ndarray, matrix: np.ndarray, start: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(paths, score per path) by direct summation over every sequence."""
    m, t = scores.shape
    paths = all_paths(m, t)
    totals = start[paths[:, 0]] + scores[np.arange(m), paths].sum(axis=1)
    if m > 1:
        totals = totals + matrix[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return paths, totals


def enum_log_partition(
    scores: np.ndarray, matrix: np.ndarray, start: np.ndarray
) -> float:
    _, totals = enum_path_scores(scores, matrix, start)
    top = totals.max()
    if not math.isfinite(top):
        return float(top)
    return float(top + math.log(np.exp(totals - top).sum()))


def enum_viterbi(
    scores: np.ndarray, matrix: np.ndarray, start: np.ndarray
) -> list[int]:
    """Exhaustive argmax.  Among equal-scoring paths the winner is the one
    a lowest-index backpointer rule produces: minimal when read from the
    last tag backwards."""
    paths, totals = enum_path_scores(scores, matrix, start)
    best = totals.max()
    candidates = [tuple(p) for p in paths[totals == best]]
    return list(min(candidates, key=lambda p: tuple(reversed(p))))


def enum_nll(
    scores: np.ndarray, matrix: np.ndarray, start: np.ndarray, tags
) -> float:
    m = scores.shape[0]
    y = np.asarray([int(t) for t in tags])
    gold = start[y[0]] + scores[np.arange(m), y].sum()
    if m > 1:
        gold += matrix[y[:-1], y[1:]].sum()
    return enum_log_partition(scores, matrix, start) - float(gold)


# ---------------------------------------------------------------------------
# finite differences


def numeric_gradients(loss_fn, named_params, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar loss w.r.t. every entry of
    every named array, perturbing the live arrays in place."""
    out = {}
    for name, arr in named_params:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn()
            flat[i] = orig - h
            f_minus = loss_fn()
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
        out[name] = grad
    return out


def max_relative_error(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]
) -> float:
    """Worst entrywise |a - n| / max(1, |a|, |n|) over all arrays."""
    worst = 0.0
    for name, n_grad in numeric.items():
        a_grad = analytic[name]
        denom = np.maximum(1.0, np.maximum(np.abs(a_grad), np.abs(n_grad)))
        if a_grad.size:
            worst = max(worst, float(np.max(np.abs(a_grad - n_grad) / denom)))
    return worst


# ---------------------------------------------------------------------------
# small factories


def random_instance(
    rng: np.random.Generator, m: int, *, scale: float = 2.0, quantized: bool = False
) -> tuple[np.ndarray, Transitions]:
    """A random CRF instance (emissions, unmasked transitions).  Quantized
    instances take values on a coarse dyadic grid so ties are exact."""
    if quantized:
        scores = rng.integers(-2, 3, size=(m, NUM_TAGS)) * 0.5
        matrix = rng.integers(-2, 3, size=(NUM_TAGS, NUM_TAGS)) * 0.5
        start = rng.integers(-2, 3, size=NUM_TAGS) * 0.5
    else:
        scores = rng.normal(0.0, scale, size=(m, NUM_TAGS))
        matrix = rng.normal(0.0, scale, size=(NUM_TAGS, NUM_TAGS))
        start = rng.normal(0.0, scale, size=NUM_TAGS)
    return np.asarray(scores, dtype=float), Transitions(
        np.asarray(matrix, dtype=float), np.asarray(start, dtype=float), masked=False
    )


def tiny_model(
    seed: int = 0,
    *,
    chars: str = "abcdefgh",
    embed_dim: int = 3,
    filter_counts: dict[int, int] | None = None,
    masked: bool = False,
) -> Model:
    rng = np.random.default_rng(seed)
    vocab = Vocab(chars)
    return init_model(
        vocab,
        rng,
        embed_dim=embed_dim,
        filter_counts=filter_counts or {2: 2, 3: 2},
        masked=masked,
    )


def random_valid_tags(rng: np.random.Generator, m: int) -> list[Tag]:
    """A uniformly random valid BMES sequence, built as a random segmentation."""
    tags: list[Tag] = []
    remaining = m
    while remaining:
        length = int(rng.integers(1, remaining + 1))
        if length == 1:
            tags.append(Tag.S)
        else:
            tags.extend([Tag.B] + [Tag.M] * (length - 2) + [Tag.E])
        remaining -= length
    return tags
