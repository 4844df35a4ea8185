"""Differentiable operations.

Every op accepts :class:`Tensor` inputs (plain arrays and Python numbers are
treated as constants), computes its forward value with numpy and, when a tape
is active and some input requires gradients, records a closure that maps
output gradients to input gradients.

Shape conventions (``B`` batch, ``L`` time, ``E``/``F``/``H`` features):

=================  ==============================  ==================
op                 inputs                           output
=================  ==============================  ==================
matmul             (m,k)@(k,n) or (B,m,k)@(B,k,n)   (m,n) / (B,m,n)
affine             x(...,in), W(in,out), b(out)    (...,out)
conv1d             x(B,L,E), K(w,E,F), b(F)        (B,L-w+1,F)
max_pool_time      x(B,L,F)                        (B,F)
lstm_cell          x(B,E), h(B,H), c(B,H)          h'(B,H), c'(B,H)
lstm               x(B,L,E)                        (B,L,H)
softmax            any, along ``axis``             same
=================  ==============================  ==================

Unbatched ``(L,E)`` inputs are accepted by ``conv1d``/``max_pool_time``/
``lstm`` and give unbatched outputs. Broadcasting is limited to scalars.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import NumericsError, ShapeError, WindowError
from .tensor import Tensor, active_tape

__all__ = [
    "add", "sub", "mul", "scale", "matmul", "transpose", "reshape", "affine",
    "sigmoid", "tanh", "relu", "exp", "log", "softmax", "log_softmax", "concat",
    "sum", "mean", "take", "conv1d", "max_pool_time", "lstm_cell", "lstm",
    "masked_mean", "rowdot", "as_tensor",
]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _data(x):
    return x.data if isinstance(x, Tensor) else x


def _needs_grad(inputs) -> bool:
    return any(isinstance(t, Tensor) and t.requires_grad for t in inputs)


def _emit(op, inputs, out, backward) -> Tensor:
    tape = active_tape()
    track = tape is not None and _needs_grad(inputs)
    result = Tensor._wrap(out, track)
    if track:
        tape.record(op, inputs, (result,), backward)
    return result


def _emit_many(op, inputs, outs, backward) -> tuple:
    tape = active_tape()
    track = tape is not None and _needs_grad(inputs)
    results = tuple(Tensor._wrap(o, track) for o in outs)
    if track:
        tape.record(op, inputs, results, backward)
    return results


def _is_scalar(x) -> bool:
    return np.ndim(_data(x)) == 0


def _check_same(a, b, op):
    sa, sb = np.shape(_data(a)), np.shape(_data(b))
    if sa != sb and not (_is_scalar(a) or _is_scalar(b)):
        raise ShapeError(f"{op}: shapes {sa} and {sb} differ")


def _reduce_to(g, like):
    # gradient for a scalar operand broadcast against a tensor
    return np.asarray(g.sum()).reshape(np.shape(_data(like))) if _is_scalar(like) and np.ndim(g) else g


# -- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    _check_same(a, b, "add")
    out = np.add(_data(a), _data(b), dtype=np.float64)
    return _emit("add", (a, b), out, lambda g: (_reduce_to(g, a), _reduce_to(g, b)))


def sub(a, b) -> Tensor:
    _check_same(a, b, "sub")
    out = np.subtract(_data(a), _data(b), dtype=np.float64)
    return _emit("sub", (a, b), out, lambda g: (_reduce_to(g, a), _reduce_to(-g, b)))


def mul(a, b) -> Tensor:
    _check_same(a, b, "mul")
    da, db = _data(a), _data(b)
    out = np.multiply(da, db, dtype=np.float64)
    return _emit("mul", (a, b), out, lambda g: (_reduce_to(g * db, a), _reduce_to(g * da, b)))


def scale(x, s: float) -> Tensor:
    s = float(s)
    out = _data(x) * s
    return _emit("scale", (x,), out, lambda g: (g * s,))


def sigmoid(x) -> Tensor:
    out = _sigmoid(_data(x))
    return _emit("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    out = np.tanh(_data(x))
    return _emit("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def relu(x) -> Tensor:
    d = _data(x)
    pos = d > 0
    out = np.where(pos, d, 0.0)
    return _emit("relu", (x,), out, lambda g: (g * pos,))


def exp(x) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(_data(x))
    if not np.all(np.isfinite(out)):
        raise NumericsError("exp overflowed")
    return _emit("exp", (x,), out, lambda g: (g * out,))


def log(x) -> Tensor:
    d = _data(x)
    if np.any(d <= 0):
        raise NumericsError("log of a non-positive value")
    out = np.log(d)
    return _emit("log", (x,), out, lambda g: (g / d,))


def _sigmoid(z):
    # tanh form is overflow-free and avoids sign-split masking
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# -- softmax family ----------------------------------------------------------

def _softmax(d, axis):
    shifted = d - d.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis: int = -1) -> Tensor:
    """Softmax with max subtraction; rows sum to one."""
    out = _softmax(_data(x), axis)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _emit("softmax", (x,), out, backward)


def log_softmax(x, axis: int = -1) -> Tensor:
    d = _data(x)
    shifted = d - d.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit("log_softmax", (x,), out, backward)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b) -> Tensor:
    da, db = _data(a), _data(b)
    if da.ndim not in (2, 3) or da.ndim != db.ndim:
        raise ShapeError(f"matmul: need two 2-D or two 3-D operands, got {da.shape} and {db.shape}")
    if da.shape[-1] != db.shape[-2] or (da.ndim == 3 and da.shape[0] != db.shape[0]):
        raise ShapeError(f"matmul: {da.shape} and {db.shape} are not conformable")
    out = da @ db

    def backward(g):
        return g @ np.swapaxes(db, -1, -2), np.swapaxes(da, -1, -2) @ g

    return _emit("matmul", (a, b), out, backward)


def transpose(x) -> Tensor:
    """Swap the last two axes."""
    d = _data(x)
    if d.ndim < 2:
        raise ShapeError("transpose needs at least 2 dimensions")
    out = np.ascontiguousarray(np.swapaxes(d, -1, -2))
    return _emit("transpose", (x,), out, lambda g: (np.swapaxes(g, -1, -2),))


def reshape(x, shape) -> Tensor:
    d = _data(x)
    try:
        out = d.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _emit("reshape", (x,), out.copy(), lambda g: (g.reshape(d.shape),))


def affine(x, W, b=None) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``."""
    dx, dW = _data(x), _data(W)
    if dW.ndim != 2 or dx.shape[-1] != dW.shape[0]:
        raise ShapeError(f"affine: input {dx.shape} does not match weight {dW.shape}")
    if b is not None and np.shape(_data(b)) != (dW.shape[1],):
        raise ShapeError(f"affine: bias shape {np.shape(_data(b))} != ({dW.shape[1]},)")
    x2 = dx.reshape(-1, dW.shape[0])
    out2 = x2 @ dW
    if b is not None:
        out2 = out2 + _data(b)
    out = out2.reshape(dx.shape[:-1] + (dW.shape[1],))

    def backward(g):
        g2 = g.reshape(-1, dW.shape[1])
        gx = (g2 @ dW.T).reshape(dx.shape)
        gW = x2.T @ g2
        gb = g2.sum(axis=0) if b is not None else None
        return gx, gW, gb

    return _emit("affine", (x, W, b), out, backward)


def rowdot(x, w, b=None) -> Tensor:
    """``sum(x * w, axis=-1) + b`` for x (...,F), w (F,), scalar b.

    Each row is reduced independently, so a row's result does not depend on
    how many rows are evaluated together.
    """
    dx, dw = _data(x), _data(w)
    if dw.ndim != 1 or dx.shape[-1] != dw.shape[0]:
        raise ShapeError(f"rowdot: input {dx.shape} does not match weight {dw.shape}")
    if b is not None and np.ndim(_data(b)) != 0:
        raise ShapeError("rowdot: bias must be a scalar")
    out = (dx * dw).sum(axis=-1)
    if b is not None:
        out = out + _data(b)
    out = np.asarray(out, dtype=np.float64)

    def backward(g):
        g = np.asarray(g)
        gx = g[..., None] * dw
        gw = (g[..., None] * dx).reshape(-1, dw.shape[0]).sum(axis=0)
        gb = np.asarray(g.sum()) if b is not None else None
        return gx, gw, gb

    return _emit("rowdot", (x, w, b), out, backward)


# -- structural --------------------------------------------------------------

def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    datas = [_data(t) for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    sizes = [d.shape[axis] for d in datas]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _emit("concat", tuple(tensors), out, backward)


def sum(x, axis: Optional[int] = None) -> Tensor:  # noqa: A001 - mirrors numpy
    d = _data(x)
    out = np.asarray(d.sum(axis=axis), dtype=np.float64)

    def backward(g):
        if axis is None:
            return (np.full(d.shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), d.shape).copy(),)

    return _emit("sum", (x,), out, backward)


def mean(x, axis: Optional[int] = None) -> Tensor:
    d = _data(x)
    n = d.size if axis is None else d.shape[axis]
    out = np.asarray(d.mean(axis=axis), dtype=np.float64)

    def backward(g):
        if axis is None:
            return (np.full(d.shape, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, d.shape).copy(),)

    return _emit("mean", (x,), out, backward)


def take(x, index, axis: int = 0) -> Tensor:
    """Gather along ``axis`` (``np.take`` semantics); used for embeddings."""
    d = _data(x)
    idx = np.asarray(index)
    if idx.size and (idx.max() >= d.shape[axis] or idx.min() < -d.shape[axis]):
        raise ShapeError(f"take: index out of range for axis of size {d.shape[axis]}")
    out = np.take(d, idx, axis=axis)

    def backward(g):
        gx = np.zeros_like(d)
        if idx.ndim == 0:
            sl = [slice(None)] * d.ndim
            sl[axis] = int(idx)
            gx[tuple(sl)] += g
        else:
            gm = np.moveaxis(gx, axis, 0)  # view into gx
            gg = np.moveaxis(g, list(range(axis, axis + idx.ndim)), list(range(idx.ndim)))
            np.add.at(gm, idx, gg)
        return (gx,)

    return _emit("take", (x,), out, backward)


def masked_mean(x, mask) -> Tensor:
    """Mean over axis 1 of ``x`` (B,L,F) restricted to positions where ``mask`` (B,L) is 1."""
    d = _data(x)
    m = np.asarray(mask, dtype=np.float64)
    if d.ndim != 3 or m.shape != d.shape[:2]:
        raise ShapeError(f"masked_mean: x {d.shape} and mask {m.shape} disagree")
    counts = m.sum(axis=1, keepdims=True)
    if np.any(counts == 0):
        raise ShapeError("masked_mean: a row has no unmasked positions")
    w = m / counts
    out = np.einsum("blf,bl->bf", d, w)
    return _emit("masked_mean", (x,), out, lambda g: (g[:, None, :] * w[:, :, None],))


# -- convolution / pooling ---------------------------------------------------

def conv1d(x, kernel, bias=None) -> Tensor:
    """Valid 1-D convolution (cross-correlation) over time with E in, F out channels."""
    dx, dk = _data(x), _data(kernel)
    unbatched = dx.ndim == 2
    if unbatched:
        dx = dx[None]
    if dx.ndim != 3 or dk.ndim != 3 or dk.shape[1] != dx.shape[2]:
        raise ShapeError(f"conv1d: input {np.shape(_data(x))} vs kernel {dk.shape}")
    if bias is not None and np.shape(_data(bias)) != (dk.shape[2],):
        raise ShapeError("conv1d: bias must have one entry per output channel")
    B, L, E = dx.shape
    w, _, F = dk.shape
    if w > L:
        raise WindowError(f"conv1d: kernel width {w} exceeds sequence length {L}")
    Lo = L - w + 1
    # (B, Lo, E, w) -> (B, Lo, w, E) -> (B*Lo, w*E)
    win = np.ascontiguousarray(sliding_window_view(dx, w, axis=1).transpose(0, 1, 3, 2)).reshape(B * Lo, w * E)
    k2 = dk.reshape(w * E, F)
    out = win @ k2
    if bias is not None:
        out = out + _data(bias)
    out = out.reshape(B, Lo, F)
    if unbatched:
        out = out[0]

    def backward(g):
        g2 = g.reshape(B * Lo, F)
        gk = (win.T @ g2).reshape(w, E, F)
        gb = g2.sum(axis=0) if bias is not None else None
        gwin = (g2 @ k2.T).reshape(B, Lo, w, E)
        gx = np.zeros((B, L, E))
        for j in range(w):
            gx[:, j:j + Lo] += gwin[:, :, j]
        return (gx[0] if unbatched else gx), gk, gb

    return _emit("conv1d", (x, kernel, bias), out, backward)


def max_pool_time(x, lengths=None) -> Tensor:
    """Max over the time axis; ``lengths`` limits each row to its first n steps.

    Gradient goes to the argmax position only, ties resolved to the lowest index.
    """
    d = _data(x)
    unbatched = d.ndim == 2
    if unbatched:
        d = d[None]
    if d.ndim != 3:
        raise ShapeError(f"max_pool_time: expected (B,L,F), got {np.shape(_data(x))}")
    B, L, F = d.shape
    src = d
    if lengths is not None:
        lengths = np.asarray(lengths, dtype=np.int64).reshape(B)
        if np.any(lengths < 1) or np.any(lengths > L):
            raise WindowError(f"max_pool_time: lengths must lie in [1, {L}]")
        if np.any(lengths < L):
            invalid = np.arange(L)[None, :] >= lengths[:, None]
            src = np.where(invalid[:, :, None], -np.inf, d)
    arg = src.argmax(axis=1)  # (B, F), first maximum wins
    bi, fi = np.meshgrid(np.arange(B), np.arange(F), indexing="ij")
    out = d[bi, arg, fi]
    if unbatched:
        out = out[0]

    def backward(g):
        gx = np.zeros((B, L, F))
        gx[bi, arg, fi] = g.reshape(B, F)
        return (gx[0] if unbatched else gx,)

    return _emit("max_pool_time", (x,), out, backward)


# -- recurrent ---------------------------------------------------------------
# Gate layout along the 4H axis: input, forget, output, candidate.

def _cell_forward(xw, h, c, U, b):
    z = xw + h @ U + b
    H = h.shape[1]
    ifo = _sigmoid(z[:, :3 * H])
    gg = np.tanh(z[:, 3 * H:])
    i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
    c_new = f * c + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (ifo, gg, tc)


def _cell_backward(gh, gc, c, U, cache):
    # gradients w.r.t. the gate pre-activation, previous h and previous c
    ifo, gg, tc = cache
    H = gg.shape[1]
    i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
    gc = gc + gh * o * (1.0 - tc * tc)
    dz = np.empty((gg.shape[0], 4 * H))
    dz[:, :H] = gc * gg
    dz[:, H:2 * H] = gc * c
    dz[:, 2 * H:3 * H] = gh * tc
    dz[:, :3 * H] *= ifo * (1.0 - ifo)
    dz[:, 3 * H:] = gc * i * (1.0 - gg * gg)
    return dz, dz @ U.T, gc * f


def lstm_cell(x, h, c, W, U, b, mask=None):
    """One LSTM step. Returns ``(h_new, c_new)``.

    Where ``mask`` (B,) is 0 the previous state is carried through unchanged.
    """
    dx, dh, dc, dW, dU, db = (_data(t) for t in (x, h, c, W, U, b))
    H = dh.shape[1]
    if dW.shape != (dx.shape[1], 4 * H) or dU.shape != (H, 4 * H) or db.shape != (4 * H,) \
            or dc.shape != dh.shape or dx.shape[0] != dh.shape[0]:
        raise ShapeError("lstm_cell: inconsistent shapes")
    h_new, c_new, cache = _cell_forward(dx @ dW, dh, dc, dU, db)
    m = None
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
        h_new = m * h_new + (1.0 - m) * dh
        c_new = m * c_new + (1.0 - m) * dc

    def backward(gh, gc):
        ghi, gci = (gh, gc) if m is None else (gh * m, gc * m)
        dz, gh_prev, gc_prev = _cell_backward(ghi, gci, dc, dU, cache)
        if m is not None:
            gh_prev = gh_prev + gh * (1.0 - m)
            gc_prev = gc_prev + gc * (1.0 - m)
        return dz @ dW.T, gh_prev, gc_prev, dx.T @ dz, dh.T @ dz, dz.sum(axis=0)

    return _emit_many("lstm_cell", (x, h, c, W, U, b), (h_new, c_new), backward)


def lstm(x, W, U, b, mask=None, reverse: bool = False) -> Tensor:
    """Run an LSTM over a whole sequence from a zero state; returns every hidden state.

    Steps where ``mask`` (B,L) is 0 carry the state through unchanged, so with
    right-padding the last hidden state equals the state after the last real
    token. ``reverse`` processes time backwards (outputs stay in input order).
    """
    dx, dW, dU, db = (_data(t) for t in (x, W, U, b))
    unbatched = dx.ndim == 2
    if unbatched:
        dx = dx[None]
    B, L, E = dx.shape
    H = dU.shape[0]
    if dW.shape != (E, 4 * H) or dU.shape != (H, 4 * H) or db.shape != (4 * H,):
        raise ShapeError(f"lstm: weights {dW.shape}/{dU.shape}/{db.shape} do not fit input {dx.shape}")
    m = None if mask is None else np.asarray(mask, dtype=np.float64).reshape(B, L)
    xw = (dx.reshape(B * L, E) @ dW).reshape(B, L, 4 * H)
    order = range(L - 1, -1, -1) if reverse else range(L)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.empty((B, L, H))
    steps = []
    for t in order:
        h_new, c_new, cache = _cell_forward(xw[:, t], h, c, dU, db)
        if m is not None:
            mt = m[:, t:t + 1]
            h_new = mt * h_new + (1.0 - mt) * h
            c_new = mt * c_new + (1.0 - mt) * c
        steps.append((t, h, c, cache))
        h, c = h_new, c_new
        hs[:, t] = h
    out = hs[0] if unbatched else hs

    def backward(g):
        g = g[None] if unbatched else g
        gxw = np.zeros((B, L, 4 * H))
        h_prevs = np.empty((B, L, H))
        gh = np.zeros((B, H))
        gc = np.zeros((B, H))
        for t, h_prev, c_prev, cache in reversed(steps):
            gh = gh + g[:, t]
            if m is not None:
                mt = m[:, t:t + 1]
                dz, gh_p, gc_p = _cell_backward(gh * mt, gc * mt, c_prev, dU, cache)
                gh_p = gh_p + gh * (1.0 - mt)
                gc_p = gc_p + gc * (1.0 - mt)
            else:
                dz, gh_p, gc_p = _cell_backward(gh, gc, c_prev, dU, cache)
            gxw[:, t] = dz
            h_prevs[:, t] = h_prev
            gh, gc = gh_p, gc_p
        gxw2 = gxw.reshape(B * L, 4 * H)
        gx = (gxw2 @ dW.T).reshape(B, L, E)
        gW = dx.reshape(B * L, E).T @ gxw2
        gU = h_prevs.reshape(B * L, H).T @ gxw2
        gb = gxw2.sum(axis=0)
        return (gx[0] if unbatched else gx), gW, gU, gb

    return _emit("lstm", (x, W, U, b), out, backward)
