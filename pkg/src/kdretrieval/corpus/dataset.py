"""Fixed-size candidate sets per claim, coverage statistics and claim splits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..exceptions import AlignmentError, InsufficientCorpusError, LabelError, SplitError
from .text import Claim, Document
from .tfidf import TfidfIndex

# train/dev/test claim counts of the FEVER document-retrieval split
FEVER_SPLIT = (145000, 20000, 10000)


@dataclass
class CandidateSet:
    claim_id: str
    candidates: list
    labels: list
    teacher_logits: Optional[list] = None

    def __post_init__(self):
        self.candidates = list(self.candidates)
        self.labels = [int(v) for v in self.labels]
        if len(self.candidates) != len(self.labels):
            raise AlignmentError(f"{self.claim_id}: {len(self.candidates)} candidates but {len(self.labels)} labels")
        if len(set(self.candidates)) != len(self.candidates):
            raise AlignmentError(f"{self.claim_id}: duplicate candidate ids")
        if any(v not in (0, 1) for v in self.labels):
            raise LabelError(f"{self.claim_id}: labels must be 0/1")
        if sum(self.labels) < 1:
            raise LabelError(f"{self.claim_id}: no positive candidate")
        if self.teacher_logits is not None:
            self.teacher_logits = [float(v) for v in self.teacher_logits]
            if len(self.teacher_logits) != len(self.candidates):
                raise AlignmentError(f"{self.claim_id}: teacher logits not aligned with candidates")

    @property
    def size(self) -> int:
        return len(self.candidates)

    @property
    def n_positive(self) -> int:
        return sum(self.labels)

    def to_json(self) -> dict:
        return {"claim_id": self.claim_id, "candidates": list(self.candidates), "labels": list(self.labels)}

    @classmethod
    def from_json(cls, obj: dict) -> "CandidateSet":
        return cls(obj["claim_id"], obj["candidates"], obj["labels"])


def _check_claims(claims, index: TfidfIndex):
    known = set(index.doc_ids)
    for c in claims:
        if not c.relevant_doc_ids:
            raise LabelError(f"claim {c.id} has no relevant documents")
        missing = [d for d in c.relevant_doc_ids if d not in known]
        if missing:
            raise AlignmentError(f"claim {c.id} references unknown documents {missing}")


def candidate_set(claim: Claim, ranking: Sequence[tuple], C: int) -> CandidateSet:
    """Build one candidate set from a claim and the full TF-IDF ranking of the corpus.

    Gold positives are always included (the ``C`` best-ranked ones if there are
    more than ``C``); the remaining slots take the best-ranked non-gold
    documents. The resulting set is ordered by ranking position, which places
    positives outside the top ``C`` after every mined document.
    """
    position = {doc_id: r for r, (doc_id, _) in enumerate(ranking)}
    gold = sorted(set(claim.relevant_doc_ids), key=position.__getitem__)[:C]
    gold_set = set(gold)
    negatives = []
    for doc_id, _ in ranking:
        if len(negatives) >= C - len(gold):
            break
        if doc_id not in gold_set:
            negatives.append(doc_id)
    chosen = sorted(gold + negatives, key=position.__getitem__)
    return CandidateSet(claim.id, chosen, [int(d in gold_set) for d in chosen])


def assemble_dataset(claims: Iterable[Claim], corpus, C: int) -> list[CandidateSet]:
    """One :class:`CandidateSet` of exactly ``C`` documents per claim.

    ``corpus`` is a :class:`TfidfIndex` or a sequence of documents.
    """
    if C < 1:
        raise ValueError("C must be at least 1")
    index = corpus if isinstance(corpus, TfidfIndex) else TfidfIndex(list(corpus))
    if len(index) < C:
        raise InsufficientCorpusError(f"corpus has {len(index)} documents, fewer than C={C}")
    claims = list(claims)
    _check_claims(claims, index)
    return [candidate_set(c, index.rank(c.text), C) for c in claims]


def coverage_stats(claims: Iterable[Claim], corpus, C_values: Sequence[int]) -> dict[int, float]:
    """Percentage of claims whose gold documents all fall in the TF-IDF top ``C``."""
    index = corpus if isinstance(corpus, TfidfIndex) else TfidfIndex(list(corpus))
    claims = list(claims)
    _check_claims(claims, index)
    if not claims:
        return {C: 0.0 for C in C_values}
    # worst (largest) rank position among each claim's gold documents
    worst = []
    for c in claims:
        position = {doc_id: r for r, (doc_id, _) in enumerate(index.rank(c.text))}
        worst.append(max(position[d] for d in c.relevant_doc_ids))
    worst = np.asarray(worst)
    return {int(C): 100.0 * float(np.count_nonzero(worst < C)) / len(claims) for C in C_values}


@dataclass(frozen=True)
class SplitSpec:
    """Claim counts per partition. Unset sizes scale the FEVER 145k/20k/10k split."""

    train: Optional[int] = None
    dev: Optional[int] = None
    test: Optional[int] = None

    def sizes(self, n: int) -> tuple[int, int, int]:
        if self.train is None and self.dev is None and self.test is None:
            return proportional_sizes(n, FEVER_SPLIT)
        sizes = tuple(0 if s is None else int(s) for s in (self.train, self.dev, self.test))
        if any(s < 0 for s in sizes):
            raise SplitError("split sizes must be non-negative")
        if sum(sizes) > n:
            raise SplitError(f"split sizes {sizes} exceed {n} claims")
        # leftover claims join the training partition so the split covers every claim
        return (sizes[0] + n - sum(sizes), sizes[1], sizes[2])


def proportional_sizes(n: int, ratio: Sequence[int]) -> tuple:
    """Largest-remainder apportionment of ``n`` items by ``ratio``."""
    total = sum(ratio)
    exact = [n * r / total for r in ratio]
    base = [int(np.floor(e)) for e in exact]
    leftover = n - sum(base)
    order = sorted(range(len(ratio)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return tuple(base)


@dataclass
class Split:
    train: list = field(default_factory=list)
    dev: list = field(default_factory=list)
    test: list = field(default_factory=list)


def split_claims(claims: Sequence, spec: SplitSpec = SplitSpec(), seed: int = 0) -> Split:
    claims = list(claims)
    n_train, n_dev, n_test = spec.sizes(len(claims))
    perm = np.random.default_rng(seed).permutation(len(claims))
    parts = np.split(perm, [n_train, n_train + n_dev])
    train, dev, test = ([claims[i] for i in sorted(p)] for p in parts)
    return Split(train, dev, test)
