from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..exceptions import VocabError

_SPLIT = re.compile(r"[^0-9a-z]+")

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on runs of non-alphanumerics, drop empties."""
    return [t for t in _SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class Document:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")

    @property
    def terms(self) -> list[str]:
        return tokenize(self.text)


@dataclass(frozen=True)
class Claim:
    id: str
    text: str
    relevant_doc_ids: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.id:
            raise ValueError("claim id must be non-empty")
        object.__setattr__(self, "relevant_doc_ids", tuple(self.relevant_doc_ids))

    @property
    def terms(self) -> list[str]:
        return tokenize(self.text)


class Vocabulary:
    """Token <-> id map with PAD=0 and UNK=1 reserved.

    Regular tokens are numbered by descending frequency, then alphabetically.
    """

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        for tok in tokens:
            if tok in self.stoi:
                raise ValueError(f"duplicate token {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    @classmethod
    def build(cls, texts: Iterable[str], min_count: int = 1, max_size: Optional[int] = None) -> "Vocabulary":
        counts = Counter()
        for text in texts:
            counts.update(tokenize(text))
        ranked = sorted((t for t, n in counts.items() if n >= min_count), key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size - 2)]
        return cls(ranked)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def encode(self, text: str) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokenize(text)]

    def decode(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.itos):
                raise VocabError(f"id {i} outside vocabulary of size {len(self.itos)}")
            out.append(self.itos[i])
        return out

    def to_list(self) -> list[str]:
        return self.itos[2:]
