"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..exceptions import NumericsError
from .tensor import Tape, Tensor


def grad_check(f: Callable[..., Tensor], x: Union[Tensor, Sequence[Tensor]], h: float = 1e-5,
               max_coords: Optional[int] = None, seed: int = 0) -> float:
    """Compare tape gradients of scalar ``f(*x)`` against central differences.

    Returns ``max |analytic - numeric| / max(1, |analytic|)`` over the checked
    coordinates. ``max_coords`` caps the number of coordinates probed per
    tensor (sampled with ``seed``); by default every coordinate is checked.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    for t in xs:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        y = f(*xs)
    if not np.all(np.isfinite(y.data)):
        raise NumericsError("f is not finite at x")
    tape.backward(y)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in xs]

    def value() -> float:
        v = f(*xs).data
        if not np.all(np.isfinite(v)):
            raise NumericsError("f is not finite at a perturbed point")
        return float(v.reshape(-1)[0])

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, a in zip(xs, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            up = value()
            flat[i] = orig - h
            down = value()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            ai = a.reshape(-1)[i]
            worst = max(worst, abs(ai - numeric) / max(1.0, abs(ai)))
    return worst
