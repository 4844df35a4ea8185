"""Temperature-softened targets and the soft / hard / mixed objectives.

Losses take teacher logits and labels as plain arrays and student logits as a
:class:`Tensor` (or array) of shape ``(C,)`` for one claim or ``(B, C)`` for a
batch; batched losses are the mean of the per-claim losses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops
from ..exceptions import CacheError, LabelError, NumericsError, ShapeError

SOFT_LOSSES = ("ce", "mse")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.0
    temperature: float = 1.0
    soft_loss: str = "mse"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.soft_loss not in SOFT_LOSSES:
            raise ValueError(f"soft_loss must be one of {SOFT_LOSSES}, got {self.soft_loss!r}")

    @property
    def label(self) -> str:
        if self.alpha == 0:
            return "No Teacher"
        return f"{self.soft_loss.upper()}/{self.alpha:g}/{self.temperature:g}"


def temperature_softmax(logits, T: float) -> np.ndarray:
    """``exp(t_i/T) / sum_j exp(t_j/T)`` along the last axis.

    ``T == 0`` gives the one-hot argmax (first maximum wins).
    """
    t = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise NumericsError("logits must be finite")
    if T < 0:
        raise ValueError("temperature must be >= 0")
    if T == 0:
        out = np.zeros_like(t)
        np.put_along_axis(out, t.argmax(axis=-1)[..., None], 1.0, axis=-1)
        return out
    z = t / T
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _student(student_logits, teacher_logits=None) -> Tensor:
    s = ops.as_tensor(student_logits)
    if s.ndim not in (1, 2):
        raise ShapeError(f"student logits must be (C,) or (B, C), got {s.shape}")
    if teacher_logits is not None and np.shape(teacher_logits) != s.shape:
        raise ShapeError(f"teacher logits {np.shape(teacher_logits)} and student logits {s.shape} differ")
    return s


def _reduce(per_claim: Tensor) -> Tensor:
    return per_claim if per_claim.ndim == 0 else ops.mean(per_claim)


def _student_T(T: float) -> float:
    # T == 0 sharpens only the teacher side; the student stays at T = 1
    return T if T > 0 else 1.0


def soft_loss_ce(teacher_logits, student_logits, T: float) -> Tensor:
    """``-sum_i t'_i log p_i`` with both sides softened at temperature ``T``."""
    s = _student(student_logits, teacher_logits)
    target = temperature_softmax(teacher_logits, T)
    logp = ops.log_softmax(ops.scale(s, 1.0 / _student_T(T)), axis=-1)
    return _reduce(ops.scale(ops.sum(ops.mul(logp, target), axis=-1), -1.0))


def soft_loss_mse(teacher_logits, student_logits, T: float) -> Tensor:
    """``sum_i (t'_i - p_i)^2`` between the softened distributions."""
    s = _student(student_logits, teacher_logits)
    target = temperature_softmax(teacher_logits, T)
    diff = ops.sub(ops.softmax(ops.scale(s, 1.0 / _student_T(T)), axis=-1), target)
    return _reduce(ops.sum(ops.mul(diff, diff), axis=-1))


def hard_loss(labels, student_logits) -> Tensor:
    """Cross-entropy against the label distribution ``y / c`` (softmax at T=1)."""
    s = _student(student_logits)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != s.shape:
        raise ShapeError(f"labels {y.shape} and student logits {s.shape} differ")
    counts = y.sum(axis=-1, keepdims=True)
    if np.any(counts == 0):
        raise LabelError("every claim needs at least one positive label")
    target = y / counts
    logp = ops.log_softmax(s, axis=-1)
    return _reduce(ops.scale(ops.sum(ops.mul(logp, target), axis=-1), -1.0))


def soft_loss(config: LossConfig, teacher_logits, student_logits) -> Tensor:
    fn = soft_loss_ce if config.soft_loss == "ce" else soft_loss_mse
    return fn(teacher_logits, student_logits, config.temperature)


def combined_loss(config: LossConfig, labels, teacher_logits, student_logits) -> Tensor:
    """``alpha * soft + (1 - alpha) * hard``; the zero-weight term is never computed."""
    if config.alpha == 0:
        return hard_loss(labels, student_logits)
    if teacher_logits is None:
        raise CacheError("alpha > 0 needs teacher logits")
    if config.alpha == 1:
        return soft_loss(config, teacher_logits, student_logits)
    return ops.add(ops.scale(soft_loss(config, teacher_logits, student_logits), config.alpha),
                   ops.scale(hard_loss(labels, student_logits), 1.0 - config.alpha))
