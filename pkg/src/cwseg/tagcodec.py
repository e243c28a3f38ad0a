"""BMES tag codec: convert between word segmentations and per-character tags."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence


class Tag(IntEnum):
    """Character position tag: Begin / Middle / End of a word, or Single."""

    B = 0
    M = 1
    E = 2
    S = 3


NUM_TAGS = len(Tag)

START_TAGS = frozenset({Tag.B, Tag.S})
END_TAGS = frozenset({Tag.E, Tag.S})

# A word either continues (B, M -> M, E) or a new one opens right after the
# previous one closed (E, S -> B, S).  Everything else is illegal.
_ALLOWED_NEXT = {
    Tag.B: frozenset({Tag.M, Tag.E}),
    Tag.M: frozenset({Tag.M, Tag.E}),
    Tag.E: frozenset({Tag.B, Tag.S}),
    Tag.S: frozenset({Tag.B, Tag.S}),
}


def is_valid_transition(a: Tag | int, b: Tag | int) -> bool:
    """True iff tag ``b`` may directly follow tag ``a``."""
    return Tag(b) in _ALLOWED_NEXT[Tag(a)]


def is_valid_sequence(tags: Sequence[Tag | int]) -> bool:
    """Whole-sequence validity; the empty sequence counts as valid."""
    if not tags:
        return True
    if Tag(tags[0]) not in START_TAGS or Tag(tags[-1]) not in END_TAGS:
        return False
    return all(is_valid_transition(a, b) for a, b in zip(tags, tags[1:]))


def words_to_tags(words: Iterable[str]) -> list[Tag]:
    """Tag a segmentation: one-character words get S, longer ones B M..M E."""
    tags: list[Tag] = []
    for word in words:
        n = len(word)
        if n == 0:
            raise ValueError("segmentation contains an empty word")
        if n == 1:
            tags.append(Tag.S)
        else:
            tags.append(Tag.B)
            tags.extend([Tag.M] * (n - 2))
            tags.append(Tag.E)
    return tags


def tags_to_words(chars: str, tags: Sequence[Tag | int]) -> list[str]:
    """Cut ``chars`` at the word boundaries implied by ``tags``.

    Total on any tag sequence of matching length: a cut is placed before
    every B and S and after every E and S, overlapping cuts merge.  Valid
    sequences round-trip exactly; invalid ones still yield a segmentation.
    """
    if len(chars) != len(tags):
        raise ValueError(
            f"length mismatch: {len(chars)} characters vs {len(tags)} tags"
        )
    cuts = {0, len(chars)}
    for i, t in enumerate(tags):
        t = Tag(t)
        if t in START_TAGS:
            cuts.add(i)
        if t in END_TAGS:
            cuts.add(i + 1)
    edges = sorted(cuts)
    return [chars[a:b] for a, b in zip(edges, edges[1:])]


@dataclass(frozen=True)
class LabeledSentence:
    """A character sequence paired with one BMES tag per character."""

    chars: str
    tags: tuple[Tag, ...]

    def __post_init__(self) -> None:
        if len(self.chars) != len(self.tags):
            raise ValueError(
                f"{len(self.chars)} characters but {len(self.tags)} tags"
            )
        if not is_valid_sequence(self.tags):
            raise ValueError(f"invalid BMES sequence: {self.tags}")

    @property
    def words(self) -> list[str]:
        return tags_to_words(self.chars, self.tags)

    def __len__(self) -> int:
        return len(self.chars)


def labeled_from_words(words: Sequence[str]) -> LabeledSentence:
    """Build a labeled sentence from a known segmentation."""
    return LabeledSentence("".join(words), tuple(words_to_tags(words)))
