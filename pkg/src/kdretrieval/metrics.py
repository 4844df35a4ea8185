"""Ranking metrics: micro/macro recall at k, R(1) and normalised DCG.

All aggregate values are percentages. Candidates are ranked by descending
score with ties broken by ascending document id.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import AlignmentError, EmptyError


@dataclass(frozen=True)
class RankedClaim:
    claim_id: str
    ranked_doc_ids: tuple
    relevance: tuple  # r_ij aligned with ranked_doc_ids

    @property
    def n_relevant(self) -> int:
        return sum(self.relevance)

    def hits(self, k: int) -> int:
        return sum(self.relevance[:k])


def rank_claim(claim_id: str, candidates: Sequence[str], labels: Sequence[int], scores) -> RankedClaim:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(scores) != len(candidates) or len(labels) != len(candidates):
        raise AlignmentError(f"{claim_id}: {len(scores)} scores for {len(candidates)} candidates")
    if not np.all(np.isfinite(scores)):
        raise AlignmentError(f"{claim_id}: non-finite score")
    order = sorted(range(len(candidates)), key=lambda j: (-scores[j], candidates[j]))
    return RankedClaim(claim_id, tuple(candidates[j] for j in order), tuple(int(labels[j]) for j in order))


def _check(ranked: Sequence[RankedClaim], k=None):
    if not ranked:
        raise EmptyError("no claims to evaluate")
    for r in ranked:
        if r.n_relevant < 1:
            raise EmptyError(f"claim {r.claim_id} has no relevant candidate")
        if k is not None and not 1 <= k <= len(r.ranked_doc_ids):
            raise ValueError(f"k={k} outside [1, {len(r.ranked_doc_ids)}] for claim {r.claim_id}")


def recall_macro(ranked: Sequence[RankedClaim], k: int) -> float:
    _check(ranked, k)
    return 100.0 * sum(r.hits(k) / r.n_relevant for r in ranked) / len(ranked)


def recall_micro(ranked: Sequence[RankedClaim], k: int) -> float:
    _check(ranked, k)
    return 100.0 * sum(r.hits(k) for r in ranked) / sum(r.n_relevant for r in ranked)


def _ndcg(r: RankedClaim) -> float:
    gain = sum(rel / math.log2(j + 2) for j, rel in enumerate(r.relevance))
    ideal = sum(1.0 / math.log2(j + 2) for j in range(r.n_relevant))
    return gain / ideal


def dcg(ranked: Sequence[RankedClaim]) -> float:
    """Mean per-claim normalised DCG (binary gains, log2(j+1) discount) x 100."""
    _check(ranked)
    return 100.0 * sum(_ndcg(r) for r in ranked) / len(ranked)


@dataclass(frozen=True)
class RankingReport:
    r1: float
    recall_micro_3: float
    recall_macro_3: float
    recall_micro_5: float
    recall_macro_5: float
    dcg: float
    n: int

    COLUMNS = (("R(1)", "r1"), ("Rmicro(3)", "recall_micro_3"), ("Rmacro(3)", "recall_macro_3"),
               ("Rmicro(5)", "recall_micro_5"), ("Rmacro(5)", "recall_macro_5"), ("DCG", "dcg"))

    def to_json(self) -> dict:
        return asdict(self)

    def row(self) -> list:
        return [getattr(self, f) for _, f in self.COLUMNS]


def report(ranked: Sequence[RankedClaim]) -> RankingReport:
    _check(ranked)
    C = min(len(r.ranked_doc_ids) for r in ranked)
    k3, k5 = min(3, C), min(5, C)
    return RankingReport(
        r1=recall_micro(ranked, 1),
        recall_micro_3=recall_micro(ranked, k3),
        recall_macro_3=recall_macro(ranked, k3),
        recall_micro_5=recall_micro(ranked, k5),
        recall_macro_5=recall_macro(ranked, k5),
        dcg=dcg(ranked),
        n=len(ranked),
    )


def evaluate(scores: Mapping[str, Sequence[float]], sets) -> RankingReport:
    """Report for candidate sets given a ``claim_id -> scores`` mapping."""
    ranked = []
    for s in sets:
        if s.claim_id not in scores:
            raise AlignmentError(f"no scores for claim {s.claim_id}")
        ranked.append(rank_claim(s.claim_id, s.candidates, s.labels, scores[s.claim_id]))
    return report(ranked)


def format_table(rows: Sequence[tuple], title: str = "") -> str:
    """Aligned text table of ``(label, RankingReport)`` rows."""
    header = ["SoftLoss/alpha/T"] + [c for c, _ in RankingReport.COLUMNS]
    body = [[label] + [f"{v:.2f}" for v in rep.row()] for label, rep in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = [title] if title else []
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    lines.append(fmt(header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in body)
    return "\n".join(lines)


def report_json(rep: RankingReport, config=None) -> str:
    obj = rep.to_json()
    if config is not None:
        obj["config"] = config
    return json.dumps(obj, sort_keys=True, indent=2)
