"""Dictionaries and dictionary-driven data synthesis: pseudo labeled
sentences assembled from uniformly sampled words, and positive/negative
samples for the word classification task.  Also owns the two text formats
shared across the toolkit: one-word-per-line dictionaries and
space-separated segmented corpora."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .tagcodec import LabeledSentence, labeled_from_words
from .wordclf import WordSample

INTERNAL = "internal"
EXTERNAL = "external"


class DictionaryEncodingError(ValueError):
    """A dictionary file line that is not valid UTF-8."""

    def __init__(self, path, line: int):
        super().__init__(f"{path}: line {line} is not valid UTF-8")
        self.line = line


class GenerationError(RuntimeError):
    """Negative-sample generation exhausted its retry budget."""


class Dictionary:
    """Deduplicated word list with an internal/external origin per entry.

    Entries keep insertion order so that sampling under a fixed seed is
    reproducible; the first origin registered for a word wins.
    """

    def __init__(self, words: Iterable[str] = (), origin: str = EXTERNAL):
        self._origin: dict[str, str] = {}
        for word in words:
            self.add(word, origin)

    def add(self, word: str, origin: str = EXTERNAL) -> None:
        if not word:
            raise ValueError("dictionary words must be non-empty")
        if origin not in (INTERNAL, EXTERNAL):
            raise ValueError(f"unknown origin {origin!r}")
        self._origin.setdefault(word, origin)

    def origin(self, word: str) -> str:
        return self._origin[word]

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self._origin)

    def union(self, other: "Dictionary") -> "Dictionary":
        merged = Dictionary()
        for word in self:
            merged.add(word, self.origin(word))
        for word in other:
            merged.add(word, other.origin(word))
        return merged

    def charset(self) -> tuple[str, ...]:
        """Sorted distinct characters over all entries."""
        return tuple(sorted({c for w in self._origin for c in w}))

    def __contains__(self, word: str) -> bool:
        return word in self._origin

    def __iter__(self):
        return iter(self._origin)

    def __len__(self) -> int:
        return len(self._origin)


def load_dictionary(path) -> Dictionary:
    """One word per line, UTF-8, LF or CRLF; surrounding whitespace is
    trimmed, blank lines are skipped, duplicates collapse.  Entries are
    tagged external."""
    with open(path, "rb") as fh:
        raw = fh.read()
    dictionary = Dictionary()
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DictionaryEncodingError(path, lineno) from exc
        word = text.strip()
        if word:
            dictionary.add(word, EXTERNAL)
    return dictionary


def build_internal_dictionary(corpus: Iterable[Sequence[str]]) -> Dictionary:
    """All distinct words of a segmented corpus, tagged internal."""
    dictionary = Dictionary()
    for sentence in corpus:
        for word in sentence:
            dictionary.add(word, INTERNAL)
    return dictionary


def gen_pseudo_sentence(
    dictionary: Dictionary, u: int, rng: np.random.Generator
) -> LabeledSentence:
    """Concatenate ``u`` uniformly sampled words (with replacement); the
    tags follow from the sampled word boundaries."""
    if len(dictionary) == 0:
        raise ValueError("cannot sample from an empty dictionary")
    if u < 1:
        raise ValueError(f"need at least one word per sentence, got {u}")
    words = dictionary.words
    picks = rng.integers(0, len(words), size=u)
    return labeled_from_words([words[i] for i in picks])


def gen_pseudo_corpus(
    dictionary: Dictionary,
    count: int,
    rng: np.random.Generator,
    *,
    u_min: int = 3,
    u_max: int = 8,
) -> list[LabeledSentence]:
    """``count`` pseudo sentences; the per-sentence word count is drawn
    uniformly from [u_min, u_max] (set both equal for a fixed count)."""
    if len(dictionary) == 0:
        raise ValueError("cannot sample from an empty dictionary")
    if count < 0:
        raise ValueError(f"sentence count must be >= 0, got {count}")
    if not 1 <= u_min <= u_max:
        raise ValueError(f"need 1 <= u_min <= u_max, got [{u_min}, {u_max}]")
    out = []
    for _ in range(count):
        u = int(rng.integers(u_min, u_max + 1))
        out.append(gen_pseudo_sentence(dictionary, u, rng))
    return out


def propose_replacement(
    word: str, p: float, charset: Sequence[str], rng: np.random.Generator
) -> tuple[str, np.ndarray]:
    """One corruption proposal: each character is independently replaced by
    a uniform charset draw with probability ``p``.

    Returns the candidate and the boolean replacement mask.  A draw may
    coincide with the original character, so the mask (not a string diff)
    is the ground truth for replacement-rate checks.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"replace probability must be in (0, 1], got {p}")
    if len(charset) == 0:
        raise ValueError("replacement charset is empty")
    flags = rng.random(len(word)) < p
    chars = list(word)
    for i in np.flatnonzero(flags):
        chars[i] = charset[int(rng.integers(0, len(charset)))]
    return "".join(chars), flags


def gen_negative_word(
    dictionary: Dictionary,
    rng: np.random.Generator,
    *,
    p: float = 0.5,
    charset: Sequence[str] | None = None,
    max_tries: int = 100,
) -> str:
    """Corrupt a sampled dictionary word until the result is neither
    unchanged nor a dictionary entry."""
    if len(dictionary) == 0:
        raise ValueError("cannot sample from an empty dictionary")
    if charset is None:
        charset = dictionary.charset()
    words = dictionary.words
    for _ in range(max_tries):
        word = words[int(rng.integers(0, len(words)))]
        candidate, _ = propose_replacement(word, p, charset, rng)
        if candidate != word and candidate not in dictionary:
            return candidate
    raise GenerationError(
        f"no usable negative sample after {max_tries} attempts"
    )


def gen_classification_set(
    dictionary: Dictionary,
    rng: np.random.Generator,
    *,
    n_neg: int | None = None,
    p: float = 0.5,
    charset: Sequence[str] | None = None,
) -> list[WordSample]:
    """Every dictionary word as a positive sample plus ``n_neg`` generated
    negatives (default: as many negatives as positives), shuffled."""
    if len(dictionary) == 0:
        raise ValueError("cannot build samples from an empty dictionary")
    if n_neg is None:
        n_neg = len(dictionary)
    if n_neg < 0:
        raise ValueError(f"negative sample count must be >= 0, got {n_neg}")
    if charset is None:
        charset = dictionary.charset()
    samples = [WordSample(w, 1) for w in dictionary.words]
    samples += [
        WordSample(gen_negative_word(dictionary, rng, p=p, charset=charset), -1)
        for _ in range(n_neg)
    ]
    order = rng.permutation(len(samples))
    return [samples[i] for i in order]


def read_segmented_corpus(path) -> list[list[str]]:
    """One sentence per line, words space-separated; repeated spaces are
    tolerated and blank lines yield empty sentences."""
    sentences = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            sentences.append([w for w in line.split(" ") if w])
    return sentences


def write_segmented_corpus(sentences: Iterable[Sequence[str]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for words in sentences:
            fh.write(" ".join(words) + "\n")


def gen_random_dictionary(
    rng: np.random.Generator,
    *,
    n_multi: int = 200,
    n_single: int = 40,
    alphabet_size: int = 60,
    min_len: int = 2,
    max_len: int = 4,
    first_codepoint: int = 0x4E00,
) -> Dictionary:
    """Synthetic dictionary for experiments: ``n_multi`` distinct
    multi-character words over a private alphabet, plus ``n_single``
    single-character words on codepoints disjoint from that alphabet."""
    if not 2 <= min_len <= max_len:
        raise ValueError(f"need 2 <= min_len <= max_len, got [{min_len}, {max_len}]")
    alphabet = [chr(first_codepoint + i) for i in range(alphabet_size)]
    dictionary = Dictionary()
    budget = 50 * n_multi
    while len(dictionary) < n_multi:
        if budget == 0:
            raise GenerationError("alphabet too small for the requested word count")
        budget -= 1
        length = int(rng.integers(min_len, max_len + 1))
        picks = rng.integers(0, alphabet_size, size=length)
        dictionary.add("".join(alphabet[int(i)] for i in picks), EXTERNAL)
    for i in range(n_single):
        dictionary.add(chr(first_codepoint + alphabet_size + i), EXTERNAL)
    return dictionary
