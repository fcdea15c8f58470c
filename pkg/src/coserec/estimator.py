"""Scikit-learn style front end: fit on a corpus of item sequences, predict
next items, score with ranking metrics."""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .augment import AugmentParams, LONG_OPS_DEFAULT, SHORT_OPS_DEFAULT
from .corpus import SequenceCorpus, corpus_from_sequences
from .encoder import EncoderConfig, pad_sequences
from .evaluator import MetricReport, evaluate
from .trainer import TrainConfig, train


class CoSeRec(BaseEstimator):
    """Contrastively regularized self-attention next-item recommender.

    Follows the scikit-learn estimator protocol: hyperparameters are
    constructor arguments stored verbatim, ``fit`` learns from data, and
    fitted state lives in trailing-underscore attributes. ``X`` may be a
    :class:`SequenceCorpus` or an iterable of per-user item sequences
    (anything hashable; at least three items each).
    """

    def __init__(
        self,
        embedding_dim: int = 64,
        blocks: int = 2,
        heads: int = 2,
        max_len: int = 50,
        dropout: float = 0.2,
        eta: float = 0.5,
        mu: float = 0.5,
        omega: float = 0.5,
        alpha: float = 0.2,
        beta: float = 0.2,
        short_threshold: int = 12,
        short_ops: tuple = SHORT_OPS_DEFAULT,
        long_ops: tuple = LONG_OPS_DEFAULT,
        ssl_weight: float = 0.1,
        switch_epoch: int = 160,
        lr: float = 1e-3,
        batch_size: int = 256,
        max_epochs: int = 200,
        patience: int = 40,
        mode: str = "multi-task",
        pretrain_epochs: int = 50,
        early_stop_metric: str = "ndcg@20",
        seed: int = 42,
    ):
        self.embedding_dim = embedding_dim
        self.blocks = blocks
        self.heads = heads
        self.max_len = max_len
        self.dropout = dropout
        self.eta = eta
        self.mu = mu
        self.omega = omega
        self.alpha = alpha
        self.beta = beta
        self.short_threshold = short_threshold
        self.short_ops = short_ops
        self.long_ops = long_ops
        self.ssl_weight = ssl_weight
        self.switch_epoch = switch_epoch
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.mode = mode
        self.pretrain_epochs = pretrain_epochs
        self.early_stop_metric = early_stop_metric
        self.seed = seed

    def _configs(self, item_count: int):
        aug = AugmentParams(
            eta=self.eta, mu=self.mu, omega=self.omega,
            alpha=self.alpha, beta=self.beta,
            short_threshold=self.short_threshold,
            short_ops=tuple(self.short_ops), long_ops=tuple(self.long_ops),
        )
        enc = EncoderConfig(
            item_count=item_count,
            embedding_dim=self.embedding_dim, blocks=self.blocks,
            heads=self.heads, max_len=self.max_len, dropout=self.dropout,
        )
        cfg = TrainConfig(
            ssl_weight=self.ssl_weight, switch_epoch=self.switch_epoch,
            max_epochs=self.max_epochs, batch_size=self.batch_size,
            lr=self.lr, patience=self.patience, seed=self.seed,
            mode=self.mode, pretrain_epochs=self.pretrain_epochs,
            early_stop_metric=self.early_stop_metric,
        )
        aug.validate()
        enc.validate()
        cfg.validate()
        return cfg, aug, enc

    def fit(self, X, y=None):
        corpus = X if isinstance(X, SequenceCorpus) else corpus_from_sequences(X)
        cfg, aug, enc = self._configs(corpus.n_items)
        self.model_, self.train_log_ = train(corpus, cfg, aug, enc)
        self.corpus_ = corpus
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this CoSeRec instance is not fitted yet; call fit first")

    def _to_internal(self, sequences) -> list[list[int]]:
        vocab = self.corpus_.vocabulary
        out = []
        for seq in sequences:
            row = []
            for item in seq:
                ext = str(item)
                if ext not in vocab:
                    raise ValueError(f"unknown item {item!r}; not seen during fit")
                row.append(vocab.internal(ext))
            if not row:
                raise ValueError("cannot predict from an empty sequence")
            out.append(row)
        return out

    def predict_scores(self, X) -> np.ndarray:
        """Next-item scores, one row per input sequence (column j = item j+1)."""
        self._check_fitted()
        ids = pad_sequences(self._to_internal(X), self.model_.config.max_len)
        with torch.no_grad():
            hidden = self.model_.encode(ids, train_mode=False)
            scores = self.model_.score_items(hidden[:, -1])
        return scores.cpu().numpy()

    def predict(self, X) -> np.ndarray:
        """Most likely next item per sequence, as the original external labels."""
        scores = self.predict_scores(X)
        vocab = self.corpus_.vocabulary
        winners = scores.argmax(axis=1) + 1
        return np.array([vocab.external(int(w)) for w in winners], dtype=object)

    def evaluate(self, split: str = "test") -> MetricReport:
        """Ranking metrics of the fitted model on a held-out split."""
        self._check_fitted()
        return evaluate(self.model_, self.corpus_, split)

    def score(self, X=None, y=None) -> float:
        """Test NDCG@10 on the fitted corpus (scikit-learn scorer protocol)."""
        self._check_fitted()
        return self.evaluate("test").get("ndcg@10")
