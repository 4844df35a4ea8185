"""Claim-independent dual-encoder students (SimpleCNN / SimpleLSTM).

The claim and the document are encoded by separate towers that never see
each other; a single linear head joins ``[c ; d ; c*d]`` into a logit.
"""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, ops
from .base import ScoringModel, affine_param_count, lstm_param_count, lstm_specs, pad_batch

VARIANTS = ("cnn", "lstm")


class StudentModel(ScoringModel):
    kind = "student"

    def __init__(self, config, variant: str = "lstm", params=None, seed=None):
        if variant not in VARIANTS:
            raise ValueError(f"student variant must be one of {VARIANTS}, got {variant!r}")
        self._variant = variant
        super().__init__(config, params=params, seed=seed)

    @property
    def variant(self) -> str:
        return self._variant

    def _rebuild(self, params):
        return type(self)(self.config, self._variant, params=params)

    def param_specs(self) -> list:
        c = self.config
        E, H, F = c.embed_dim, c.hidden_dim, c.filters
        specs = [("embedding", (c.vocab_size, E), False)]
        for side in ("claim", "doc"):
            if self._variant == "lstm":
                specs += lstm_specs(f"{side}.lstm", E, H)
            else:
                for w in c.kernel_widths:
                    specs += [(f"{side}.conv{w}.K", (w, E, F), False), (f"{side}.conv{w}.b", (F,), True)]
                specs += [(f"{side}.proj.W", (len(c.kernel_widths) * F, H), False),
                          (f"{side}.proj.b", (H,), True)]
        specs += [("join.w", (3 * H,), False), ("join.b", (), True)]
        return specs

    def expected_param_count(self) -> int:
        """Closed-form parameter total for this configuration."""
        c = self.config
        E, H, F = c.embed_dim, c.hidden_dim, c.filters
        if self._variant == "lstm":
            tower = lstm_param_count(E, H)
        else:
            tower = sum(w * E * F + F for w in c.kernel_widths) + affine_param_count(len(c.kernel_widths) * F, H)
        return c.vocab_size * E + 2 * tower + affine_param_count(3 * H, 1)

    # -- encoders ------------------------------------------------------------

    def _encode(self, side: str, token_lists) -> Tensor:
        c = self.config
        self.check_tokens(token_lists)
        p = self.params
        max_len = c.max_claim_len if side == "claim" else c.max_doc_len
        min_len = max(c.kernel_widths) if self._variant == "cnn" else 1
        ids, mask, lengths = pad_batch(token_lists, min_len=min_len, max_len=max_len)
        x = ops.take(p["embedding"], ids)
        if self._variant == "lstm":
            hs = ops.lstm(x, p[f"{side}.lstm.W"], p[f"{side}.lstm.U"], p[f"{side}.lstm.b"], mask=mask)
            # masked steps carry the state, so the last column is the final real state
            return ops.take(hs, ids.shape[1] - 1, axis=1)
        pooled = []
        for w in c.kernel_widths:
            feat = ops.relu(ops.conv1d(x, p[f"{side}.conv{w}.K"], p[f"{side}.conv{w}.b"]))
            pooled.append(ops.max_pool_time(feat, lengths=np.maximum(lengths - w + 1, 1)))
        return ops.tanh(ops.affine(ops.concat(pooled, -1), p[f"{side}.proj.W"], p[f"{side}.proj.b"]))

    def encode_documents(self, token_lists) -> Tensor:
        return self._encode("doc", token_lists)

    def encode_claims(self, token_lists) -> Tensor:
        return self._encode("claim", token_lists)

    def encode_document(self, tokens) -> np.ndarray:
        return self.encode_documents([tokens]).data[0]

    def encode_claim(self, tokens) -> np.ndarray:
        return self.encode_claims([tokens]).data[0]

    # -- join head -----------------------------------------------------------

    def score(self, claim_enc, doc_enc) -> Tensor:
        """Logit ``w . [c ; d ; c*d] + b``; works row-wise on stacked encodings."""
        feats = ops.concat([claim_enc, doc_enc, ops.mul(claim_enc, doc_enc)], axis=-1)
        return ops.rowdot(feats, self.params["join.w"], self.params["join.b"])

    def score_candidates(self, claim_tokens, doc_tokens, cand_index) -> Tensor:
        """Logits (B, C) for B claims against their candidates.

        ``doc_tokens`` lists each distinct document once and ``cand_index``
        (B, C) points into it, so shared candidates are encoded once.
        """
        cand_index = np.asarray(cand_index)
        B, C = cand_index.shape
        d = ops.take(self.encode_documents(doc_tokens), cand_index)
        q = ops.take(self.encode_claims(claim_tokens), np.repeat(np.arange(B), C).reshape(B, C))
        return self.score(q, d)
