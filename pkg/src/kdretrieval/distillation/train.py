from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..autodiff import Tape
from ..exceptions import CacheError, DivergenceError
from ..metrics import RankingReport, evaluate
from .losses import LossConfig, combined_loss
from .optim import Adam

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    data_fraction: float = 1.0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValueError("data_fraction must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_report: Optional[RankingReport] = None
    n_train: int = 0


def select_fraction(sets: Sequence, fraction: float, seed: int) -> list:
    """Deterministic subset of ``ceil(fraction * n)`` sets, in original order."""
    sets = list(sets)
    if fraction >= 1.0:
        return sets
    n = max(1, math.ceil(fraction * len(sets)))
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])
    keep = np.sort(rng.permutation(len(sets))[:n])
    return [sets[i] for i in keep]


def model_scores(model, sets: Sequence, store, batch_size: int = 32) -> dict:
    """``claim_id -> logits`` for every candidate set (no tape)."""
    out = {}
    sets = list(sets)
    for start in range(0, len(sets), batch_size):
        chunk = sets[start:start + batch_size]
        b = store.batch(chunk)
        logits = model.score_candidates(b.claim_tokens, b.doc_tokens, b.cand_index).data
        for s, row in zip(chunk, logits):
            out[s.claim_id] = row.copy()
    return out


def train(model, train_sets: Sequence, store, loss_config: LossConfig, config: TrainConfig,
          cache=None, dev_sets: Optional[Sequence] = None) -> TrainResult:
    """Train a copy of ``model``; returns the best-dev (or final) copy.

    A batch loss is the mean per-claim combined loss. The teacher cache is
    only read when ``alpha > 0``.
    """
    if loss_config.alpha > 0 and cache is None:
        raise CacheError("alpha > 0 requires a teacher logit cache")
    teacher = cache if loss_config.alpha > 0 else None
    model = model.copy()
    opt = Adam(model.params, lr=config.lr, betas=(config.beta1, config.beta2), eps=config.eps)
    sets = select_fraction(train_sets, config.data_fraction, config.seed)
    if not sets:
        raise ValueError("no training claims")
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(2)[1])
    result = TrainResult(model=model, n_train=len(sets))
    best_key = None
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(sets))
        total, count = 0.0, 0
        for start in range(0, len(sets), config.batch_size):
            chunk = [sets[i] for i in order[start:start + config.batch_size]]
            batch = store.batch(chunk)
            t = teacher.matrix(chunk) if teacher is not None else None
            snapshot = model.copy()
            opt.zero_grad()
            with Tape() as tape:
                logits = model.score_candidates(batch.claim_tokens, batch.doc_tokens, batch.cand_index)
                loss = combined_loss(loss_config, batch.labels, t, logits)
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", checkpoint=snapshot)
            tape.backward(loss)
            opt.step()
            total += value * len(chunk)
            count += len(chunk)
        entry = {"epoch": epoch, "train_loss": total / count}
        if dev_sets:
            rep = evaluate(model_scores(model, dev_sets, store), dev_sets)
            entry["dev"] = asdict(rep)
            key = rep.recall_micro_3
            if best_key is None or key > best_key:
                best_key = key
                result.model = model.copy()
                result.best_epoch = epoch
                result.best_report = rep
        else:
            result.model = model
            result.best_epoch = epoch
        logger.info("epoch %d loss %.5f%s", epoch, entry["train_loss"],
                    f" dev Rmicro(3) {entry['dev']['recall_micro_3']:.2f}" if dev_sets else "")
        result.history.append(entry)
    if config.epochs == 0:
        result.model = model
    return result
