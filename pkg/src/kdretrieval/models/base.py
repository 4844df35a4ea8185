"""Parameter containers, initialisation and the checkpoint byte format.

Checkpoint layout (all integers little-endian)::

    8 bytes   magic  b"KDRCKPT1"
    8 bytes   u64    header length n
    n bytes   UTF-8 JSON header (sorted keys, compact):
              {"kind", "variant", "config", "params": [{"name", "shape"}, ...]}
    rest      float64 little-endian values of each parameter, in header order,
              row-major

Writing the same parameters twice yields identical bytes, so the SHA-256 of
the serialised model is used as its fingerprint.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..autodiff import Tensor
from ..exceptions import CheckpointError, VocabError

MAGIC = b"KDRCKPT1"
INIT_RANGE = 0.1


def init_params(specs: Iterable[tuple], seed: int) -> "OrderedDict[str, Tensor]":
    """Draw weights uniform(-0.1, 0.1) from ``np.random.default_rng(seed)``.

    ``specs`` is an ordered iterable of ``(name, shape, is_bias)``. Weights
    consume draws in spec order, row-major; biases are zero and consume none.
    """
    rng = np.random.default_rng(seed)
    params = OrderedDict()
    for name, shape, is_bias in specs:
        if is_bias:
            data = np.zeros(shape)
        else:
            data = rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def lstm_specs(prefix: str, n_in: int, hidden: int) -> list:
    return [(f"{prefix}.W", (n_in, 4 * hidden), False),
            (f"{prefix}.U", (hidden, 4 * hidden), False),
            (f"{prefix}.b", (4 * hidden,), True)]


def lstm_param_count(n_in: int, hidden: int) -> int:
    return 4 * hidden * (n_in + hidden) + 4 * hidden


def affine_param_count(n_in: int, n_out: int) -> int:
    return n_in * n_out + n_out


def pad_batch(token_lists, min_len: int = 1, max_len: Optional[int] = None):
    """Right-pad id lists with PAD (0). Returns ``(ids, mask, lengths)``.

    Sequences are truncated to ``max_len``; an empty sequence becomes a single
    PAD token so every row has at least one real step.
    """
    seqs = [list(t)[:max_len] if max_len else list(t) for t in token_lists]
    seqs = [s if s else [0] for s in seqs]
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = max(int(lengths.max()), min_len)
    ids = np.zeros((len(seqs), width), dtype=np.int64)
    mask = np.zeros((len(seqs), width))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask, lengths


class ScoringModel:
    """Common plumbing: named parameters, counting, copying and checkpoints."""

    kind = "model"

    def __init__(self, config, params=None, seed: Optional[int] = None):
        self.config = config
        seed = config.seed if seed is None else seed
        if params is None:
            params = init_params(self.param_specs(), seed)
        else:
            params = OrderedDict((k, v if isinstance(v, Tensor) else Tensor(v, requires_grad=True, name=k))
                                 for k, v in params.items())
            expected = {name: tuple(shape) for name, shape, _ in self.param_specs()}
            got = {k: v.shape for k, v in params.items()}
            if expected != got:
                raise CheckpointError(f"parameter layout mismatch for {type(self).__name__}")
        self.params = params

    # subclasses provide the ordered (name, shape, is_bias) list
    def param_specs(self) -> list:
        raise NotImplementedError

    @property
    def variant(self) -> str:
        return ""

    def parameters(self) -> list:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def count_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self):
        params = OrderedDict((k, v.data.copy()) for k, v in self.params.items())
        return self._rebuild(params)

    def _rebuild(self, params):
        return type(self)(self.config, params=params)

    def check_tokens(self, token_lists) -> None:
        V = self.config.vocab_size
        for toks in token_lists:
            for t in toks:
                if not 0 <= t < V:
                    raise VocabError(f"token id {t} outside vocabulary of size {V}")

    def to_bytes(self) -> bytes:
        header = {
            "kind": self.kind,
            "variant": self.variant,
            "config": dataclasses.asdict(self.config),
            "params": [{"name": k, "shape": list(v.shape)} for k, v in self.params.items()],
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        body = b"".join(np.ascontiguousarray(v.data, dtype="<f8").tobytes() for v in self.params.values())
        return MAGIC + struct.pack("<Q", len(head)) + head + body

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path) -> str:
        blob = self.to_bytes()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(blob)
        return hashlib.sha256(blob).hexdigest()


def parse_checkpoint(blob: bytes):
    """Split checkpoint bytes into ``(header dict, OrderedDict of arrays)``."""
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (n,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + n].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    offset = 16 + n
    arrays = OrderedDict()
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise CheckpointError("checkpoint truncated")
        arrays[entry["name"]] = np.frombuffer(blob[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return header, arrays
