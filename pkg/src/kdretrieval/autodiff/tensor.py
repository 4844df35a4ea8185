"""Dense float64 tensors and the tape that records operations on them.

A :class:`Tape` is opened as a context manager; every op applied to a tensor
that requires gradients while the tape is active appends one record. Calling
:meth:`Tape.backward` walks the records once, newest first, and leaves
``dL/dx`` in ``x.grad`` for every participating tensor. A tape is consumed by
``backward``; call :meth:`Tape.reset` to reuse it.

Tapes are thread-confined: the active-tape stack is thread-local.
"""
from __future__ import annotations

import itertools
import threading
import weakref
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..exceptions import NonScalarError, TapeError

_local = threading.local()
_tape_ids = itertools.count()
_tapes: "weakref.WeakValueDictionary[int, Tape]" = weakref.WeakValueDictionary()


def _stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Optional["Tape"]:
    stack = _stack()
    return stack[-1] if stack else None


class Tensor:
    """A float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "tape_id", "name", "__weakref__")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to us

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if any(d <= 0 for d in arr.shape):
            from ..exceptions import ShapeError

            raise ShapeError(f"dimensions must be positive, got {arr.shape}")
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape_id: Optional[tuple] = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        # fast path for op outputs: data is already a fresh float64 array
        t = cls.__new__(cls)
        t.data = data
        t.grad = None
        t.requires_grad = requires_grad
        t.tape_id = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.tape_id is None:
            raise TapeError("tensor was not produced on a tape")
        tape = _tapes.get(self.tape_id[0])
        if tape is None:
            raise TapeError("the tape that produced this tensor no longer exists")
        tape.backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=6)}{flag})"

    def __len__(self):
        return self.data.shape[0]

    # operator sugar; the functional forms live in ``ops``
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return NotImplemented
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)


@dataclass
class Record:
    op: str
    inputs: tuple
    outputs: tuple
    backward: Callable


class Tape:
    """Ordered log of differentiable operations."""

    def __init__(self):
        self.id = next(_tape_ids)
        self.records: list[Record] = []
        self.dead = False
        _tapes[self.id] = self

    def __enter__(self) -> "Tape":
        if self.dead:
            raise TapeError("tape already consumed by backward(); call reset() first")
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _stack()
        if not stack or stack[-1] is not self:
            raise TapeError("tape stack corrupted (tapes must nest)")
        stack.pop()

    def __len__(self):
        return len(self.records)

    def record(self, op: str, inputs: Sequence[Tensor], outputs: Sequence[Tensor],
               backward: Callable) -> None:
        index = len(self.records)
        for k, out in enumerate(outputs):
            out.tape_id = (self.id, index, k)
        self.records.append(Record(op, tuple(inputs), tuple(outputs), backward))

    def reset(self) -> None:
        self.records = []
        self.dead = False

    def backward(self, loss: Tensor) -> None:
        if self.dead:
            raise TapeError("tape already consumed by backward(); call reset() first")
        if loss.size != 1:
            raise NonScalarError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.tape_id is None or loss.tape_id[0] != self.id or loss.tape_id[1] >= len(self.records) \
                or all(o is not loss for o in self.records[loss.tape_id[1]].outputs):
            raise TapeError("loss was not produced on this tape")
        loss.grad = np.ones_like(loss.data)
        for rec in reversed(self.records):
            gouts = [o.grad for o in rec.outputs]
            if all(g is None for g in gouts):
                continue
            gouts = [np.zeros_like(o.data) if g is None else g for o, g in zip(rec.outputs, gouts)]
            gins = rec.backward(*gouts)
            for inp, g in zip(rec.inputs, gins):
                if g is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                inp.grad = g if inp.grad is None else inp.grad + g
        self.dead = True


def backward(loss: Tensor) -> None:
    """Differentiate ``loss`` on the tape that produced it."""
    loss.backward()


def parameter(data, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)
