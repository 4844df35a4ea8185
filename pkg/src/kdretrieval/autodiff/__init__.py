"""Minimal dense-tensor engine with reverse-mode differentiation."""
from . import ops
from .gradcheck import grad_check
from .tensor import Tape, Tensor, active_tape, backward, parameter

__all__ = ["Tape", "Tensor", "active_tape", "backward", "grad_check", "ops", "parameter"]
