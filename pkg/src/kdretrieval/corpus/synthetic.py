"""Synthetic claim/document corpora with planted lexical-overlap relevance.

Words are grouped into topics. Each document is a bag of words drawn mostly
from one topic. A claim copies a few words from its gold document(s) and fills
the rest with words from the same topic, so TF-IDF neighbours of a claim are
same-topic documents that share some but not all of its words.
"""
from __future__ import annotations

import numpy as np

from .text import Claim, Document


def make_synthetic(n_docs: int = 200, n_claims: int = 500, vocab_size: int = 500, n_topics: int = 10,
                   doc_len: int = 20, claim_len: int = 8, overlap: int = 4, off_topic: float = 0.2,
                   two_gold_rate: float = 0.2, seed: int = 0):
    """Returns ``(documents, claims)``."""
    if overlap > claim_len or overlap < 1:
        raise ValueError("overlap must lie in [1, claim_len]")
    rng = np.random.default_rng(seed)
    words = np.array([f"w{i:03d}" for i in range(vocab_size)])
    topic_of_word = rng.permutation(vocab_size) % n_topics
    topic_words = [np.flatnonzero(topic_of_word == k) for k in range(n_topics)]

    docs, doc_topic, doc_tokens = [], [], []
    for i in range(n_docs):
        k = i % n_topics
        n_off = rng.binomial(doc_len, off_topic)
        toks = np.concatenate([rng.choice(topic_words[k], doc_len - n_off),
                               rng.choice(vocab_size, n_off)])
        toks = rng.permutation(toks)
        doc_tokens.append(toks)
        doc_topic.append(k)
        docs.append(Document(f"d{i:04d}", " ".join(words[toks])))

    by_topic = [[i for i in range(n_docs) if doc_topic[i] == k] for k in range(n_topics)]
    claims = []
    for j in range(n_claims):
        first = int(rng.integers(n_docs))
        gold = [first]
        peers = [i for i in by_topic[doc_topic[first]] if i != first]
        if peers and rng.random() < two_gold_rate:
            gold.append(int(rng.choice(peers)))
        # split the planted overlap across the gold documents
        shares = np.full(len(gold), overlap // len(gold))
        shares[: overlap % len(gold)] += 1
        planted = [rng.choice(doc_tokens[g], int(s), replace=False) for g, s in zip(gold, shares)]
        filler = rng.choice(topic_words[doc_topic[first]], claim_len - overlap)
        toks = rng.permutation(np.concatenate(planted + [filler]))
        claims.append(Claim(f"c{j:04d}", " ".join(words[toks]), tuple(docs[g].id for g in gold)))
    return docs, claims
