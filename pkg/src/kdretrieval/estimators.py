"""scikit-learn style wrappers around the miner and the two kinds of ranker.

Constructor arguments are plain hyperparameters (so ``get_params`` /
``set_params`` / ``clone`` work); anything learned ends with an underscore.
The rankers take a list of :class:`CandidateSet` as ``X`` plus the
:class:`TokenStore` holding the token ids.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import assemble_dataset, build_tfidf_index, mine_candidates
from .distillation import LossConfig, TrainConfig, model_scores, score_teacher, train
from .metrics import evaluate
from .models import EncoderConfig, StudentModel, TeacherConfig, TeacherModel


class CandidateMiner(TransformerMixin, BaseEstimator):
    """Fit on documents, transform claims into candidate sets of size C."""

    def __init__(self, n_candidates: int = 10):
        self.n_candidates = n_candidates

    def fit(self, X, y=None):
        self.index_ = build_tfidf_index(list(X))
        self.n_documents_ = len(self.index_.doc_ids)
        return self

    def transform(self, X):
        check_is_fitted(self, "index_")
        return assemble_dataset(list(X), self.index_, self.n_candidates)

    def rank(self, claim, k: int):
        check_is_fitted(self, "index_")
        return mine_candidates(claim, self.index_, k)


class _Ranker(BaseEstimator):
    def _train_config(self):
        return TrainConfig(lr=self.lr, epochs=self.epochs, batch_size=self.batch_size, seed=self.seed,
                           data_fraction=self.data_fraction)

    def predict(self, X, store):
        """(n_sets, C) array of logits."""
        check_is_fitted(self, "model_")
        sets = list(X)
        scores = model_scores(self.model_, sets, store)
        return np.stack([scores[s.claim_id] for s in sets])

    def report(self, X, store):
        check_is_fitted(self, "model_")
        sets = list(X)
        return evaluate(model_scores(self.model_, sets, store), sets)

    def score(self, X, store):
        """Micro recall at 3 (percent)."""
        return self.report(X, store).recall_micro_3


class StudentRanker(_Ranker):
    def __init__(self, variant: str = "lstm", embed_dim: int = 64, hidden_dim: int = 64,
                 kernel_widths=(2, 3, 4), filters: int = 32, alpha: float = 0.0, temperature: float = 1.0,
                 soft_loss: str = "mse", lr: float = 1e-3, epochs: int = 10, batch_size: int = 8,
                 seed: int = 0, data_fraction: float = 1.0):
        self.variant = variant
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.kernel_widths = kernel_widths
        self.filters = filters
        self.alpha = alpha
        self.temperature = temperature
        self.soft_loss = soft_loss
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.data_fraction = data_fraction

    def fit(self, X, y=None, *, store, teacher_logits=None, dev_sets=None):
        config = EncoderConfig(len(store.vocab), embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                               kernel_widths=tuple(self.kernel_widths), filters=self.filters, seed=self.seed)
        model = StudentModel(config, self.variant)
        loss = LossConfig(self.alpha, self.temperature, self.soft_loss)
        result = train(model, list(X), store, loss, self._train_config(), cache=teacher_logits, dev_sets=dev_sets)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        return self


class TeacherRanker(_Ranker):
    def __init__(self, embed_dim: int = 64, hidden_dim: int = 200, lr: float = 1e-3, epochs: int = 10,
                 batch_size: int = 8, seed: int = 0, data_fraction: float = 1.0):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.data_fraction = data_fraction

    def fit(self, X, y=None, *, store, dev_sets=None):
        config = TeacherConfig(len(store.vocab), embed_dim=self.embed_dim, hidden_dim=self.hidden_dim, seed=self.seed)
        result = train(TeacherModel(config), list(X), store, LossConfig(0.0), self._train_config(), dev_sets=dev_sets)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        return self

    def logit_cache(self, X, store):
        """Teacher logits for every set, ready to hand to ``StudentRanker.fit``."""
        check_is_fitted(self, "model_")
        return score_teacher(self.model_, list(X), store)
