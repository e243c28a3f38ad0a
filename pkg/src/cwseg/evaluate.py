"""Word-level segmentation scoring (precision / recall / F over exact word
spans) and out-of-vocabulary rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .dictgen import read_segmented_corpus


class CorpusMismatch(ValueError):
    """Gold and predicted corpora disagree in line count or characters."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    gold_words: int
    predicted_words: int
    correct_words: int


def word_spans(words: Sequence[str]) -> set[tuple[int, int]]:
    """Half-open (start, end) character offsets of each word in order."""
    spans = set()
    pos = 0
    for word in words:
        spans.add((pos, pos + len(word)))
        pos += len(word)
    return spans


def score(
    gold: Sequence[Sequence[str]], predicted: Sequence[Sequence[str]]
) -> Score:
    """Count words whose exact span appears in both segmentations.

    P and R fall back to 0 when their denominator is 0, and F is 0 when
    P + R is.
    """
    if len(gold) != len(predicted):
        raise CorpusMismatch(
            f"sentence count mismatch: {len(gold)} gold vs "
            f"{len(predicted)} predicted"
        )
    n_gold = n_pred = n_correct = 0
    for i, (g, p) in enumerate(zip(gold, predicted)):
        if "".join(g) != "".join(p):
            raise CorpusMismatch(
                f"line {i + 1}: character content differs between gold "
                "and prediction",
                line=i + 1,
            )
        n_gold += len(g)
        n_pred += len(p)
        n_correct += len(word_spans(g) & word_spans(p))
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2.0 * n_correct / (n_gold + n_pred) if (precision + recall) > 0 else 0.0
    return Score(precision, recall, f1, n_gold, n_pred, n_correct)


def oov_rate(
    train: Iterable[Sequence[str]], test: Iterable[Sequence[str]]
) -> float:
    """Fraction of test word tokens whose type never occurs in training."""
    types = {w for sentence in train for w in sentence}
    total = oov = 0
    for sentence in test:
        for word in sentence:
            total += 1
            oov += word not in types
    return oov / total if total else 0.0


def score_files(gold_path, pred_path) -> Score:
    return score(read_segmented_corpus(gold_path), read_segmented_corpus(pred_path))


def format_score(s: Score) -> str:
    """P, R, F with four fraction digits, then gold/predicted/correct counts."""
    return (
        f"{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}\t"
        f"{s.gold_words}\t{s.predicted_words}\t{s.correct_words}"
    )
