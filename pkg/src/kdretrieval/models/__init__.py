"""Student and teacher scorers plus their functional entry points."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..autodiff import ops
from .base import ScoringModel, init_params, pad_batch, parse_checkpoint
from .config import EncoderConfig, TeacherConfig
from .student import StudentModel
from .teacher import TeacherModel

__all__ = [
    "EncoderConfig", "ScoringModel", "StudentModel", "TeacherConfig", "TeacherModel", "count_params",
    "encode_claim", "encode_document", "init_params", "load_model", "model_from_bytes", "pad_batch",
    "student_score", "teacher_score",
]


def encode_document(student: StudentModel, tokens) -> np.ndarray:
    return student.encode_document(tokens)


def encode_claim(student: StudentModel, tokens) -> np.ndarray:
    return student.encode_claim(tokens)


def student_score(student: StudentModel, claim_enc, doc_enc) -> float:
    claim_enc, doc_enc = np.asarray(claim_enc), np.asarray(doc_enc)
    if claim_enc.shape != (student.config.hidden_dim,) or doc_enc.shape != claim_enc.shape:
        from ..exceptions import ShapeError

        raise ShapeError(f"encodings must both have shape ({student.config.hidden_dim},), "
                         f"got {claim_enc.shape} and {doc_enc.shape}")
    return float(student.score(claim_enc, doc_enc).data)


def teacher_score(teacher: TeacherModel, claim_tokens, doc_tokens) -> float:
    return float(teacher.score_pairs([claim_tokens], [doc_tokens]).data[0])


def count_params(model) -> int:
    return model.count_params()


def model_from_bytes(blob: bytes) -> ScoringModel:
    header, arrays = parse_checkpoint(blob)
    if header["kind"] == "student":
        return StudentModel(EncoderConfig.from_dict(header["config"]), header["variant"], params=arrays)
    if header["kind"] == "teacher":
        return TeacherModel(TeacherConfig.from_dict(header["config"]), params=arrays)
    from ..exceptions import CheckpointError

    raise CheckpointError(f"unknown model kind {header['kind']!r}")


def load_model(path) -> ScoringModel:
    return model_from_bytes(Path(path).read_bytes())
