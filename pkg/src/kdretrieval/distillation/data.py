from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..corpus import Claim, Document, Vocabulary
from ..exceptions import AlignmentError


@dataclass
class Batch:
    claim_ids: list
    claim_tokens: list
    doc_tokens: list          # distinct documents of the batch
    cand_index: np.ndarray    # (B, C) positions into doc_tokens
    labels: np.ndarray        # (B, C)


class TokenStore:
    """Vocabulary-encoded token ids for documents and claims, keyed by id.

    The vocabulary is derived from document texts alone, so any command that
    has the corpus can rebuild it exactly.
    """

    def __init__(self, documents: Iterable[Document], claims: Iterable[Claim] = (),
                 vocab: Optional[Vocabulary] = None):
        documents = list(documents)
        self.vocab = vocab if vocab is not None else Vocabulary.build(d.text for d in documents)
        self.docs = {d.id: self.vocab.encode(d.text) for d in documents}
        self.claims = {c.id: self.vocab.encode(c.text) for c in claims}

    def add_claims(self, claims: Iterable[Claim]) -> None:
        for c in claims:
            self.claims[c.id] = self.vocab.encode(c.text)

    def doc(self, doc_id: str) -> list:
        try:
            return self.docs[doc_id]
        except KeyError:
            raise AlignmentError(f"document {doc_id} is not in the corpus") from None

    def claim(self, claim_id: str) -> list:
        try:
            return self.claims[claim_id]
        except KeyError:
            raise AlignmentError(f"claim {claim_id} is not in the claims file") from None

    def batch(self, sets: Sequence) -> Batch:
        slots: dict = {}
        doc_tokens = []
        index = np.empty((len(sets), len(sets[0].candidates)), dtype=np.int64)
        for b, s in enumerate(sets):
            if len(s.candidates) != index.shape[1]:
                raise AlignmentError("candidate sets in a batch must share the same size")
            for j, d in enumerate(s.candidates):
                if d not in slots:
                    slots[d] = len(doc_tokens)
                    doc_tokens.append(self.doc(d))
                index[b, j] = slots[d]
        return Batch(
            claim_ids=[s.claim_id for s in sets],
            claim_tokens=[self.claim(s.claim_id) for s in sets],
            doc_tokens=doc_tokens,
            cand_index=index,
            labels=np.array([s.labels for s in sets], dtype=np.float64),
        )
