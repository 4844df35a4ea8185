"""Pre-indexed student retrieval with exact encoder-call accounting.

With ``N`` claims and ``D`` documents the student encodes every document once
and every claim once (``N + D`` encoder calls); the teacher has to run its
joint encoder on every pair (``N * D`` calls).

Index file layout (integers little-endian)::

    8 bytes    magic b"KDRINDX1"
    32 bytes   SHA-256 digest of the student checkpoint bytes
    4 bytes    u32 encoding dimension
    8 bytes    u64 document count
    per document:
        4 bytes    u32 byte length of the UTF-8 id
        n bytes    id
        8*dim      float64 encoding
"""
from __future__ import annotations

import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import EmptyIndexError, IndexFormatError, VocabError

MAGIC = b"KDRINDX1"


@dataclass
class CostLedger:
    doc_encoder_calls: int = 0
    claim_encoder_calls: int = 0
    join_evaluations: int = 0
    teacher_joint_calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, **counts) -> None:
        with self._lock:
            for k, v in counts.items():
                setattr(self, k, getattr(self, k) + int(v))

    @property
    def encoder_calls(self) -> int:
        return self.doc_encoder_calls + self.claim_encoder_calls

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("doc_encoder_calls", "claim_encoder_calls", "join_evaluations", "teacher_joint_calls")}


class DocIndex:
    """Document id -> precomputed student encoding."""

    def __init__(self, doc_ids: Sequence[str], encodings: np.ndarray, provenance: str, dim: int):
        self.doc_ids = list(doc_ids)
        self.encodings = np.asarray(encodings, dtype=np.float64).reshape(len(self.doc_ids), dim)
        self.provenance = provenance
        self.dim = dim

    def __len__(self):
        return len(self.doc_ids)

    def __eq__(self, other):
        return (isinstance(other, DocIndex) and self.doc_ids == other.doc_ids and self.provenance == other.provenance
                and self.encodings.tobytes() == other.encodings.tobytes())

    def to_bytes(self) -> bytes:
        parts = [MAGIC, bytes.fromhex(self.provenance), struct.pack("<IQ", self.dim, len(self.doc_ids))]
        for doc_id, enc in zip(self.doc_ids, self.encodings):
            raw = doc_id.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
            parts.append(np.ascontiguousarray(enc, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DocIndex":
        if blob[:8] != MAGIC:
            raise IndexFormatError("not an index file (bad magic)")
        if len(blob) < 52:
            raise IndexFormatError("index file is truncated")
        provenance = blob[8:40].hex()
        dim, count = struct.unpack("<IQ", blob[40:52])
        pos = 52
        ids, encs = [], []
        for _ in range(count):
            if pos + 4 > len(blob):
                raise IndexFormatError("index file is truncated")
            (n,) = struct.unpack("<I", blob[pos:pos + 4])
            pos += 4
            ids.append(blob[pos:pos + n].decode("utf-8"))
            pos += n
            if pos + 8 * dim > len(blob):
                raise IndexFormatError("index file is truncated")
            encs.append(np.frombuffer(blob[pos:pos + 8 * dim], dtype="<f8").astype(np.float64))
            pos += 8 * dim
        if pos != len(blob):
            raise IndexFormatError("index file has trailing bytes")
        return cls(ids, np.array(encs).reshape(count, dim), provenance, dim)

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DocIndex":
        return cls.from_bytes(Path(path).read_bytes())


def _check_vocab(student, store):
    if student.config.vocab_size != len(store.vocab):
        raise VocabError(f"checkpoint vocabulary size {student.config.vocab_size} does not match "
                         f"corpus vocabulary size {len(store.vocab)}")


def build_index(student, store, doc_ids=None, ledger: CostLedger = None) -> DocIndex:
    """Encode each document exactly once with the student's document tower."""
    _check_vocab(student, store)
    ledger = ledger if ledger is not None else CostLedger()
    doc_ids = list(store.docs) if doc_ids is None else list(doc_ids)
    H = student.config.hidden_dim
    encs = np.empty((len(doc_ids), H))
    for i, d in enumerate(doc_ids):
        encs[i] = student.encode_document(store.doc(d))
        ledger.add(doc_encoder_calls=1)
    return DocIndex(doc_ids, encs, student.fingerprint(), H)


def retrieve(student, index: DocIndex, claim_tokens, k: int, ledger: CostLedger = None) -> list:
    """Top ``k`` ``(doc_id, score)`` pairs; one claim encoding, no document encodings."""
    if len(index) == 0:
        raise EmptyIndexError("index is empty")
    if not 0 <= k <= len(index):
        raise ValueError(f"k={k} outside [0, {len(index)}]")
    ledger = ledger if ledger is not None else CostLedger()
    q = student.encode_claim(claim_tokens)
    ledger.add(claim_encoder_calls=1)
    scores = student.score(np.broadcast_to(q, index.encodings.shape), index.encodings).data
    ledger.add(join_evaluations=len(index))
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.doc_ids[i]))
    return [(index.doc_ids[i], float(scores[i])) for i in order[:k]]


def teacher_rank(teacher, store, claim_tokens, doc_ids: Sequence[str], batch_size: int = 8,
                 ledger: CostLedger = None) -> list:
    """Score one claim against every document with the joint teacher encoder."""
    ledger = ledger if ledger is not None else CostLedger()
    scores = np.empty(len(doc_ids))
    for start in range(0, len(doc_ids), batch_size):
        chunk = doc_ids[start:start + batch_size]
        out = teacher.score_pairs([claim_tokens] * len(chunk), [store.doc(d) for d in chunk]).data
        scores[start:start + len(chunk)] = out
        ledger.add(teacher_joint_calls=len(chunk))
    order = sorted(range(len(doc_ids)), key=lambda i: (-scores[i], doc_ids[i]))
    return [(doc_ids[i], float(scores[i])) for i in order]


@dataclass
class BenchmarkReport:
    n_claims: int
    n_docs: int
    student_ledger: dict
    teacher_ledger: dict
    student_seconds: float
    teacher_seconds: float
    student_params: int
    teacher_params: int

    @property
    def speedup(self) -> float:
        return self.teacher_seconds / self.student_seconds if self.student_seconds > 0 else float("inf")

    def ledger_json(self) -> dict:
        """The deterministic part of the report (no timings)."""
        return {
            "n_claims": self.n_claims,
            "n_docs": self.n_docs,
            "student": self.student_ledger,
            "teacher": self.teacher_ledger,
            "student_encoder_calls": self.student_ledger["doc_encoder_calls"] + self.student_ledger["claim_encoder_calls"],
            "teacher_joint_calls": self.teacher_ledger["teacher_joint_calls"],
            "student_params": self.student_params,
            "teacher_params": self.teacher_params,
        }

    def timing_json(self) -> dict:
        return {"student_seconds": self.student_seconds, "teacher_seconds": self.teacher_seconds,
                "speedup": self.speedup}


def benchmark(student, teacher, store, claim_ids: Sequence[str], doc_ids=None, batch_size: int = 8) -> BenchmarkReport:
    """Rank every document for every claim both ways and time each path."""
    _check_vocab(student, store)
    _check_vocab(teacher, store)
    doc_ids = list(store.docs) if doc_ids is None else list(doc_ids)
    claim_ids = list(claim_ids)

    s_ledger = CostLedger()
    t0 = time.perf_counter()
    index = build_index(student, store, doc_ids, ledger=s_ledger)
    for cid in claim_ids:
        retrieve(student, index, store.claim(cid), len(index), ledger=s_ledger)
    s_time = time.perf_counter() - t0

    t_ledger = CostLedger()
    t0 = time.perf_counter()
    for cid in claim_ids:
        teacher_rank(teacher, store, store.claim(cid), doc_ids, batch_size=batch_size, ledger=t_ledger)
    t_time = time.perf_counter() - t0

    return BenchmarkReport(len(claim_ids), len(doc_ids), s_ledger.to_json(), t_ledger.to_json(),
                           s_time, t_time, student.count_params(), teacher.count_params())
