"""Walk corpus: tagged token sentences in flat arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np


@dataclass
class WalkCorpus:
    """Sentences stored as ``tokens[offsets[i]:offsets[i + 1]]`` with tag ``tags[i]``."""

    tokens: np.ndarray
    offsets: np.ndarray
    tags: np.ndarray
    num_paragraph_tags: int
    num_vertices: int
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tokens = np.ascontiguousarray(self.tokens, dtype=np.int32)
        self.offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        self.tags = np.ascontiguousarray(self.tags, dtype=np.int32)
        if len(self.offsets) != len(self.tags) + 1 or self.offsets[-1] != len(self.tokens):
            raise ValueError("offsets do not match tokens/tags")
        if len(self.tags) and (self.tags.min() < 0 or self.tags.max() >= self.num_paragraph_tags):
            raise ValueError("paragraph tag out of range")
        if len(self.tokens) and (self.tokens.min() < 0 or self.tokens.max() >= self.num_vertices):
            raise ValueError("token out of range")

    @classmethod
    def from_sentences(cls, sentences: Iterable[tuple[int, Iterable[int]]],
                       num_paragraph_tags: int | None = None,
                       num_vertices: int | None = None) -> "WalkCorpus":
        tags, toks, offsets = [], [], [0]
        for tag, sent in sentences:
            sent = list(sent)
            tags.append(tag)
            toks.extend(sent)
            offsets.append(offsets[-1] + len(sent))
        if num_paragraph_tags is None:
            num_paragraph_tags = max(tags, default=-1) + 1
        if num_vertices is None:
            num_vertices = max(toks, default=-1) + 1
        return cls(np.array(toks, dtype=np.int32), np.array(offsets), np.array(tags, dtype=np.int32),
                   num_paragraph_tags, num_vertices)

    @property
    def num_sentences(self) -> int:
        return len(self.tags)

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def token_counts(self) -> np.ndarray:
        return np.bincount(self.tokens, minlength=self.num_vertices)

    def sentence(self, i: int) -> tuple[int, list[int]]:
        return int(self.tags[i]), self.tokens[self.offsets[i]:self.offsets[i + 1]].tolist()

    @property
    def sentences(self) -> Iterator[tuple[int, list[int]]]:
        return (self.sentence(i) for i in range(self.num_sentences))

    def write(self, fh) -> None:
        """``t<TAB>v1 v2 ...`` per sentence."""
        for tag, sent in self.sentences:
            fh.write(f"{tag}\t{' '.join(map(str, sent))}\n")

    @classmethod
    def read(cls, fh, num_paragraph_tags: int | None = None,
             num_vertices: int | None = None) -> "WalkCorpus":
        def rows():
            for line in fh:
                if line.strip():
                    tag, _, rest = line.rstrip("\n").partition("\t")
                    yield int(tag), map(int, rest.split())
        return cls.from_sentences(rows(), num_paragraph_tags, num_vertices)
