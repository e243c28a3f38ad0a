"""Linear-chain CRF over the four BMES tags: path scoring, log-partition by
the forward recursion, exact marginals by forward-backward, and Viterbi
decoding.  All arithmetic stays in log space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numkit import Matrix, init_uniform, logsumexp
from .tagcodec import NUM_TAGS, Tag, is_valid_transition

# Structurally illegal BMES moves, and the two tags that cannot open a
# sentence; pinned to -inf when Transitions.masked is set.
ILLEGAL_TRANSITION = np.array(
    [[not is_valid_transition(a, b) for b in Tag] for a in Tag], dtype=bool
)
ILLEGAL_START = np.array([t not in (Tag.B, Tag.S) for t in Tag], dtype=bool)


@dataclass
class Transitions:
    """Tag-to-tag jump scores plus start scores for the first position.

    With ``masked`` set, illegal moves and start tags score -inf, so mass
    is distributed over structurally valid sequences only; the raw arrays
    keep finite values either way and masked cells receive zero gradient.
    """

    matrix: Matrix           # (T, T); [a, b] scores the move a -> b
    start: Matrix            # (T,)
    masked: bool = True

    def effective(self) -> tuple[Matrix, Matrix]:
        if not self.masked:
            return self.matrix, self.start
        matrix = self.matrix.copy()
        matrix[ILLEGAL_TRANSITION] = -np.inf
        start = self.start.copy()
        start[ILLEGAL_START] = -np.inf
        return matrix, start


def init_transitions(
    rng: np.random.Generator, scale: float = 0.05, masked: bool = True
) -> Transitions:
    return Transitions(
        init_uniform((NUM_TAGS, NUM_TAGS), scale, rng),
        init_uniform((NUM_TAGS,), scale, rng),
        masked,
    )


def _tag_array(tags: Sequence[Tag | int], m: int) -> np.ndarray:
    y = np.fromiter((int(t) for t in tags), dtype=np.int64, count=len(tags))
    if y.shape[0] != m:
        raise ValueError(f"{m} emission rows but {y.shape[0]} tags")
    return y


def _raw_path_score(
    scores: Matrix, matrix: Matrix, start: Matrix, y: np.ndarray
) -> float:
    total = start[y[0]] + scores[np.arange(y.shape[0]), y].sum()
    if y.shape[0] > 1:
        total += matrix[y[:-1], y[1:]].sum()
    return float(total)


def path_score(scores: Matrix, trans: Transitions, tags: Sequence[Tag | int]) -> float:
    """start score + per-position emissions + adjacent-tag jump scores."""
    m = scores.shape[0]
    if m == 0:
        raise ValueError("path_score needs at least one position")
    matrix, start = trans.effective()
    return _raw_path_score(scores, matrix, start, _tag_array(tags, m))


def _forward(scores: Matrix, matrix: Matrix, start: Matrix) -> Matrix:
    m, t = scores.shape
    alpha = np.empty((m, t))
    alpha[0] = start + scores[0]
    for i in range(1, m):
        alpha[i] = scores[i] + logsumexp(alpha[i - 1][:, None] + matrix, axis=0)
    return alpha


def _backward(scores: Matrix, matrix: Matrix) -> Matrix:
    m, t = scores.shape
    beta = np.zeros((m, t))
    for i in range(m - 2, -1, -1):
        beta[i] = logsumexp(matrix + (scores[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(scores: Matrix, trans: Transitions) -> float:
    """log of the sum over every tag sequence of exp(path score)."""
    if scores.shape[0] == 0:
        raise ValueError("log_partition needs at least one position")
    matrix, start = trans.effective()
    return float(logsumexp(_forward(scores, matrix, start)[-1]))


def nll(scores: Matrix, trans: Transitions, tags: Sequence[Tag | int]) -> float:
    """Negative log-likelihood of the gold tags: log_partition - path_score."""
    return log_partition(scores, trans) - path_score(scores, trans, tags)


def nll_with_gradients(
    scores: Matrix, trans: Transitions, tags: Sequence[Tag | int]
) -> tuple[float, Matrix, Matrix, Matrix]:
    """(nll, dS, dA, dstart), sharing one forward-backward sweep.

    Gradients are posterior marginals minus gold indicators.  Masked cells
    are constants and get exactly zero gradient.
    """
    m, t = scores.shape
    if m == 0:
        raise ValueError("nll_with_gradients needs at least one position")
    y = _tag_array(tags, m)
    matrix, start = trans.effective()
    alpha = _forward(scores, matrix, start)
    beta = _backward(scores, matrix)
    log_z = float(logsumexp(alpha[-1]))
    unary = np.exp(alpha + beta - log_z)
    d_scores = unary.copy()
    d_scores[np.arange(m), y] -= 1.0
    d_start = unary[0].copy()
    d_start[y[0]] -= 1.0
    d_matrix = np.zeros((t, t))
    for i in range(1, m):
        d_matrix += np.exp(
            alpha[i - 1][:, None] + matrix + (scores[i] + beta[i])[None, :] - log_z
        )
    np.add.at(d_matrix, (y[:-1], y[1:]), -1.0)
    if trans.masked:
        d_matrix[ILLEGAL_TRANSITION] = 0.0
        d_start[ILLEGAL_START] = 0.0
    loss = log_z - _raw_path_score(scores, matrix, start, y)
    return loss, d_scores, d_matrix, d_start


def crf_gradients(
    scores: Matrix, trans: Transitions, tags: Sequence[Tag | int]
) -> tuple[Matrix, Matrix, Matrix]:
    """Gradients of nll w.r.t. (emissions, transition matrix, start scores)."""
    _, d_scores, d_matrix, d_start = nll_with_gradients(scores, trans, tags)
    return d_scores, d_matrix, d_start


def viterbi(scores: Matrix, trans: Transitions) -> list[Tag]:
    """Highest-scoring tag sequence by max-product dynamic programming.

    Every argmax (backpointers and the final state) breaks ties toward the
    lowest tag index.
    """
    m, t = scores.shape
    if m == 0:
        raise ValueError("viterbi needs at least one position")
    matrix, start = trans.effective()
    delta = start + scores[0]
    pointers = np.empty((m, t), dtype=np.int64)
    for i in range(1, m):
        candidates = delta[:, None] + matrix
        best_prev = np.argmax(candidates, axis=0)
        delta = candidates[best_prev, np.arange(t)] + scores[i]
        pointers[i] = best_prev
    tag = int(np.argmax(delta))
    path = [tag]
    for i in range(m - 1, 0, -1):
        tag = int(pointers[i, tag])
        path.append(tag)
    path.reverse()
    return [Tag(v) for v in path]
