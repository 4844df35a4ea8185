"""JSON-lines readers and writers for corpus, claims and dataset files.

Writers emit one compact JSON object per line with a fixed key order, so equal
inputs always give byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .dataset import CandidateSet
from .text import Claim, Document


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def iter_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None


def write_jsonl(path, rows: Iterable[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def read_corpus(path) -> list[Document]:
    return [Document(str(o["id"]), o["text"]) for o in iter_jsonl(path)]


def write_corpus(path, docs: Iterable[Document]) -> None:
    write_jsonl(path, ({"id": d.id, "text": d.text} for d in docs))


def read_claims(path) -> list[Claim]:
    return [Claim(str(o["id"]), o["text"], tuple(str(d) for d in o["relevant_doc_ids"])) for o in iter_jsonl(path)]


def write_claims(path, claims: Iterable[Claim]) -> None:
    write_jsonl(path, ({"id": c.id, "text": c.text, "relevant_doc_ids": list(c.relevant_doc_ids)} for c in claims))


def read_dataset(path) -> list[CandidateSet]:
    return [CandidateSet.from_json(o) for o in iter_jsonl(path)]


def write_dataset(path, sets: Iterable[CandidateSet]) -> None:
    write_jsonl(path, (s.to_json() for s in sets))
