from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class EncoderConfig:
    """Architecture sizes shared by the student and teacher scorers."""

    vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 64
    kernel_widths: tuple = (2, 3, 4)
    filters: int = 32
    max_claim_len: int = 32
    max_doc_len: int = 256
    seed: int = 0

    def __post_init__(self):
        self.kernel_widths = tuple(int(w) for w in self.kernel_widths)
        dims = [self.vocab_size, self.embed_dim, self.hidden_dim, self.filters,
                self.max_claim_len, self.max_doc_len, *self.kernel_widths]
        if not self.kernel_widths or any(int(d) <= 0 for d in dims):
            raise ValueError(f"all dimensions must be positive: {self}")
        if max(self.kernel_widths) > self.max_doc_len:
            raise ValueError("kernel widths must not exceed the maximum document length")

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class TeacherConfig(EncoderConfig):
    """Teacher defaults: a 200-unit coattention encoder (CNN fields unused)."""

    hidden_dim: int = 200
