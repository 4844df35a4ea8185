"""Grid runs over (soft loss, alpha, T), one training run per cell."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .losses import LossConfig
from .train import TrainConfig, TrainResult, train

logger = logging.getLogger(__name__)

ALPHAS = (0.2, 0.5, 1.0)
TEMPERATURES = (1.0, 3.0, 6.0)
SOFT_LOSSES = ("ce", "mse")


def sweep_grid(alphas: Sequence[float] = ALPHAS, temperatures: Sequence[float] = TEMPERATURES,
               soft_losses: Sequence[str] = SOFT_LOSSES, baseline: bool = True) -> list:
    """Loss configs in table order: the no-teacher baseline first, then loss, alpha, T."""
    grid = [LossConfig(0.0)] if baseline else []
    for loss, a, t in itertools.product(soft_losses, alphas, temperatures):
        if a == 0:
            continue
        grid.append(LossConfig(float(a), float(t), loss))
    return grid


@dataclass
class SweepRow:
    loss: LossConfig
    seed: int
    result: TrainResult

    @property
    def label(self) -> str:
        return self.loss.label


def run_sweep(make_model: Callable[[int], object], train_sets, store, grid: Sequence[LossConfig],
              config: TrainConfig, cache=None, dev_sets=None, seeds: Optional[Sequence[int]] = None) -> list:
    """Train one model per (seed, loss config); ``make_model(seed)`` builds a fresh initial model."""
    rows = []
    for seed in (seeds if seeds is not None else [config.seed]):
        cfg = replace(config, seed=seed)
        for lc in grid:
            result = train(make_model(seed), train_sets, store, lc, cfg, cache=cache, dev_sets=dev_sets)
            best = result.best_report.recall_micro_3 if result.best_report else float("nan")
            logger.info("seed %d %s best dev Rmicro(3) %.2f", seed, lc.label, best)
            rows.append(SweepRow(lc, seed, result))
    return rows
