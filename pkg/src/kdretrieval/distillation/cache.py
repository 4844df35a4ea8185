"""Recorded teacher logits, one vector per claim aligned with its candidates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..corpus.io import iter_jsonl, write_jsonl
from ..exceptions import AlignmentError, CacheError


@dataclass
class TeacherLogitCache:
    logits: dict = field(default_factory=dict)
    provenance: str = ""  # fingerprint of the teacher checkpoint

    def __len__(self):
        return len(self.logits)

    def __contains__(self, claim_id):
        return claim_id in self.logits

    def get(self, claim_id: str, size: int) -> np.ndarray:
        if claim_id not in self.logits:
            raise CacheError(f"no cached teacher logits for claim {claim_id}")
        v = self.logits[claim_id]
        if len(v) != size:
            raise AlignmentError(f"claim {claim_id}: cached {len(v)} logits for {size} candidates")
        return v

    def matrix(self, sets: Sequence) -> np.ndarray:
        return np.stack([self.get(s.claim_id, len(s.candidates)) for s in sets])

    def save(self, path) -> None:
        write_jsonl(path, ({"claim_id": k, "logits": [float(x) for x in v]} for k, v in self.logits.items()))

    @classmethod
    def load(cls, path, provenance: str = "") -> "TeacherLogitCache":
        return cls({o["claim_id"]: np.asarray(o["logits"], dtype=np.float64) for o in iter_jsonl(path)},
                   provenance)


def score_teacher(teacher, sets: Sequence, store, batch_size: int = 8) -> TeacherLogitCache:
    """Run the teacher over every candidate of every claim, in candidate order."""
    cache = TeacherLogitCache(provenance=teacher.fingerprint())
    sets = list(sets)
    for start in range(0, len(sets), batch_size):
        chunk = sets[start:start + batch_size]
        batch = store.batch(chunk)
        logits = teacher.score_candidates(batch.claim_tokens, batch.doc_tokens, batch.cand_index).data
        for s, row in zip(chunk, logits):
            cache.logits[s.claim_id] = row.copy()
    return cache
