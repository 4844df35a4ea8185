"""Exact TF-IDF cosine retrieval over unigrams and bigrams.

Sums go through :func:`math.fsum`, so a score depends only on the multiset of
products that make it up, never on summation order. Mathematically tied
documents therefore get bit-identical scores and the id tie-break is exact.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from typing import Iterable, Sequence

from ..exceptions import EmptyCorpusError, InsufficientCorpusError
from .text import Document, tokenize


def terms_of(tokens: Sequence[str]) -> list[str]:
    """Unigrams followed by space-joined bigrams."""
    return list(tokens) + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]


def smooth_idf(n_docs: int, df: int) -> float:
    return math.log((1 + n_docs) / (1 + df)) + 1.0


class TfidfIndex:
    """Per-document sparse TF-IDF vectors (raw-count tf, smoothed ln idf)."""

    def __init__(self, documents: Sequence[Document]):
        documents = list(documents)
        if not documents:
            raise EmptyCorpusError("corpus is empty")
        ids = [d.id for d in documents]
        if len(set(ids)) != len(ids):
            raise ValueError("document ids must be unique")
        counts = [Counter(terms_of(tokenize(d.text))) for d in documents]
        if not any(counts):
            raise EmptyCorpusError("every document is empty after tokenization")
        self.doc_ids: list[str] = ids
        self.n_docs = len(documents)
        df = Counter()
        for c in counts:
            df.update(c.keys())
        self.idf: dict[str, float] = {t: smooth_idf(self.n_docs, n) for t, n in df.items()}
        self.vectors: list[dict[str, float]] = [
            {t: n * self.idf[t] for t, n in c.items()} for c in counts
        ]
        # squared norms; cosine = dot / sqrt(|q|^2 |d|^2) makes self-similarity exactly 1.0
        self.sq_norms: list[float] = [math.fsum(w * w for w in v.values()) for v in self.vectors]
        self.postings: dict[str, list[tuple[int, float]]] = defaultdict(list)
        for i, v in enumerate(self.vectors):
            for t, w in v.items():
                self.postings[t].append((i, w))
        self._position = {d: i for i, d in enumerate(ids)}
        # ascending-id order is the universal tie-break
        self._id_rank = {d: r for r, d in enumerate(sorted(ids))}

    def __len__(self):
        return self.n_docs

    def position(self, doc_id: str) -> int:
        return self._position[doc_id]

    def vectorize(self, text: str) -> dict[str, float]:
        counts = Counter(terms_of(tokenize(text)))
        return {t: n * self.idf.get(t, smooth_idf(self.n_docs, 0)) for t, n in counts.items()}

    def scores(self, text: str) -> list[float]:
        """Cosine similarity of ``text`` against every document, in corpus order."""
        q = self.vectorize(text)
        qsq = math.fsum(w * w for w in q.values())
        products: dict[int, list[float]] = defaultdict(list)
        for t, wq in q.items():
            for i, wd in self.postings.get(t, ()):
                products[i].append(wq * wd)
        out = [0.0] * self.n_docs
        for i, parts in products.items():
            denom = math.sqrt(qsq * self.sq_norms[i])
            if denom > 0:
                out[i] = math.fsum(parts) / denom
        return out

    def cosine(self, i: int, j: int) -> float:
        """Cosine between two indexed documents (by corpus position)."""
        vi, vj = self.vectors[i], self.vectors[j]
        if len(vj) < len(vi):
            vi, vj = vj, vi
        denom = math.sqrt(self.sq_norms[i] * self.sq_norms[j])
        if denom == 0:
            return 0.0
        return math.fsum(w * vj[t] for t, w in vi.items() if t in vj) / denom

    def rank(self, text: str) -> list[tuple[str, float]]:
        """Every document, by descending cosine then ascending id."""
        s = self.scores(text)
        order = sorted(range(self.n_docs), key=lambda i: (-s[i], self._id_rank[self.doc_ids[i]]))
        return [(self.doc_ids[i], s[i]) for i in order]


def build_tfidf_index(corpus: Iterable[Document]) -> TfidfIndex:
    return TfidfIndex(list(corpus))


def mine_candidates(claim, index: TfidfIndex, k: int) -> list[tuple[str, float]]:
    """The ``k`` nearest documents to a claim (object with ``.text`` or a string)."""
    if k > len(index):
        raise InsufficientCorpusError(f"k={k} exceeds corpus size {len(index)}")
    if k < 0:
        raise ValueError("k must be non-negative")
    text = claim if isinstance(claim, str) else claim.text
    return index.rank(text)[:k]
