"""Coattention teacher scorer (a DCN-style encoder with a scalar head).

Both sequences go through one shared LSTM; the claim side gets an extra
tanh projection. The affinity between every document and claim position is
normalised both ways, the document is fused with claim-aware summaries and
re-read by a bidirectional LSTM, then mean-pooled into a single logit.
"""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, ops
from .base import ScoringModel, affine_param_count, lstm_param_count, lstm_specs, pad_batch

_NEG = -1e30


class TeacherModel(ScoringModel):
    kind = "teacher"

    def param_specs(self) -> list:
        c = self.config
        E, H = c.embed_dim, c.hidden_dim
        return ([("embedding", (c.vocab_size, E), False)]
                + lstm_specs("enc", E, H)
                + [("qproj.W", (H, H), False), ("qproj.b", (H,), True)]
                + lstm_specs("fuse_fwd", 3 * H, H)
                + lstm_specs("fuse_bwd", 3 * H, H)
                + [("head.w", (2 * H,), False), ("head.b", (), True)])

    def expected_param_count(self) -> int:
        c = self.config
        E, H = c.embed_dim, c.hidden_dim
        return (c.vocab_size * E + lstm_param_count(E, H) + affine_param_count(H, H)
                + 2 * lstm_param_count(3 * H, H) + affine_param_count(2 * H, 1))

    def coattend(self, claim_lists, doc_lists) -> dict:
        """Forward pass over B (claim, document) pairs, keeping intermediates.

        Keys: ``D`` (B,Ld,H), ``Q`` (B,Lq,H), ``affinity`` (B,Ld,Lq),
        ``logits`` (B,).
        """
        c = self.config
        p = self.params
        if len(claim_lists) != len(doc_lists):
            raise ValueError("need one claim per document")
        self.check_tokens(claim_lists)
        self.check_tokens(doc_lists)
        qi, qm, _ = pad_batch(claim_lists, max_len=c.max_claim_len)
        di, dm, _ = pad_batch(doc_lists, max_len=c.max_doc_len)
        B, Lq = qi.shape
        Ld = di.shape[1]
        enc = (p["enc.W"], p["enc.U"], p["enc.b"])
        D = ops.lstm(ops.take(p["embedding"], di), *enc, mask=dm)
        Q0 = ops.lstm(ops.take(p["embedding"], qi), *enc, mask=qm)
        Q = ops.tanh(ops.affine(Q0, p["qproj.W"], p["qproj.b"]))

        L = ops.matmul(D, ops.transpose(Q))
        claim_pad = np.broadcast_to(((1.0 - qm) * _NEG)[:, None, :], (B, Ld, Lq)).copy()
        doc_pad = np.broadcast_to(((1.0 - dm) * _NEG)[:, None, :], (B, Lq, Ld)).copy()
        attn_doc = ops.softmax(ops.add(L, claim_pad), axis=2)                   # (B,Ld,Lq)
        attn_claim = ops.softmax(ops.add(ops.transpose(L), doc_pad), axis=2)    # (B,Lq,Ld)
        claim_summary = ops.matmul(attn_claim, D)                               # (B,Lq,H)
        doc_context = ops.matmul(attn_doc, ops.concat([Q, claim_summary], -1))  # (B,Ld,2H)
        fused = ops.concat([D, doc_context], -1)                                # (B,Ld,3H)
        fwd = ops.lstm(fused, p["fuse_fwd.W"], p["fuse_fwd.U"], p["fuse_fwd.b"], mask=dm)
        bwd = ops.lstm(fused, p["fuse_bwd.W"], p["fuse_bwd.U"], p["fuse_bwd.b"], mask=dm, reverse=True)
        pooled = ops.masked_mean(ops.concat([fwd, bwd], -1), dm)
        logits = ops.rowdot(pooled, p["head.w"], p["head.b"])
        return {"D": D, "Q": Q, "affinity": L, "logits": logits}

    def score_pairs(self, claim_lists, doc_lists) -> Tensor:
        return self.coattend(claim_lists, doc_lists)["logits"]

    def score_candidates(self, claim_tokens, doc_tokens, cand_index) -> Tensor:
        """Logits (B, C); same calling convention as the student."""
        cand_index = np.asarray(cand_index)
        B, C = cand_index.shape
        claims = [claim_tokens[b] for b in range(B) for _ in range(C)]
        docs = [doc_tokens[j] for j in cand_index.reshape(-1)]
        return ops.reshape(self.score_pairs(claims, docs), (B, C))
