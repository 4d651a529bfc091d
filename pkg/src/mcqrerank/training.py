"""Logistic training of the linear scorer with binary cross-entropy on logits.

Mini-batch gradient descent, per-epoch validation MRR@10 and early stopping
that returns the best epoch's weights.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    DataError,
    PathLike,
    Qrels,
    QuerySet,
    Run,
    RunEntry,
    TrainingPair,
    check_pairs_resolve,
)
from .metrics import mrr_at_n
from .retriever import InvertedIndex, score_all
from .scorer import CROSS_ENCODER, LinearScorer, encode_tokens, rank_logits, sigmoid
from .text import tokenize

logger = logging.getLogger(__name__)

Batch = Sequence[tuple[np.ndarray, int]]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 7
    batch_size: int = 64
    learning_rate: float = 0.1
    seed: int = 0
    patience: int = 2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must all be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_mrr10: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    initial_loss: float = math.nan
    best_epoch: int = 0
    stopped_early: bool = False

    def to_csv(self, path: PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "val_mrr10"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_mrr10)])


@dataclass(frozen=True)
class ValidationSet:
    queries: Mapping
    qrels: Qrels
    candidates: Run


# --------------------------------------------------------------------------
# loss and gradient
# --------------------------------------------------------------------------


def _check_label(y) -> None:
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")


def bce_with_logits(x: float, y: int) -> float:
    """Binary cross-entropy on a logit, ``max(x, 0) - x*y + log(1 + exp(-|x|))``."""
    _check_label(y)
    x = float(x)
    return max(x, 0.0) - x * y + math.log1p(math.exp(-abs(x)))


def _unpack(batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ValueError("empty batch")
    for _, y in batch:
        _check_label(y)
    X = np.stack([np.asarray(fv, dtype=np.float64) for fv, _ in batch])
    y = np.array([y for _, y in batch], dtype=np.float64)
    return X, y


def _losses(X: np.ndarray, y: np.ndarray, scorer: LinearScorer) -> np.ndarray:
    x = X @ scorer.w + scorer.b
    return np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))


def batch_loss(scorer: LinearScorer, batch: Batch) -> float:
    X, y = _unpack(batch)
    return math.fsum(_losses(X, y, scorer)) / len(y)


def _gradient(X: np.ndarray, y: np.ndarray, scorer: LinearScorer) -> tuple[np.ndarray, float]:
    resid = sigmoid(X @ scorer.w + scorer.b) - y
    n = len(y)
    grad_w = np.array([math.fsum(col) for col in (resid[:, None] * X).T]) / n
    return grad_w, math.fsum(resid) / n


def gradient(scorer: LinearScorer, batch: Batch) -> tuple[np.ndarray, float]:
    """Exact gradient of the mean batch loss w.r.t. ``(w, b)``."""
    X, y = _unpack(batch)
    return _gradient(X, y, scorer)


# --------------------------------------------------------------------------
# hard negatives
# --------------------------------------------------------------------------


def sample_hard_negatives(index: InvertedIndex, qrels: Qrels, query, m: int, seed: int = 0,
                          depth: int = 10) -> list[TrainingPair]:
    """Non-relevant documents from the query's BM25 top ``depth``, best first.

    When the cut at ``m`` falls inside a group of equally scored documents,
    the survivors of that group are drawn with ``seed``.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    relevant = qrels.relevant(query.id)
    scores = score_all(index, tokenize(query.text))
    ranked = sorted(((d, s) for d, s in scores.items() if s > 0), key=lambda p: (-p[1], p[0]))
    pool = [(d, s) for d, s in ranked[:depth] if d not in relevant]
    if len(pool) <= m:
        chosen = [d for d, _ in pool]
    else:
        cut = pool[m - 1][1]
        above = [d for d, s in pool if s > cut]
        tied = [d for d, s in pool if s == cut]
        chosen = above + sorted(random.Random(seed).sample(tied, m - len(above)))
    return [TrainingPair(query.id, d, 0) for d in chosen]


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


def _validate(scorer: LinearScorer, feats: dict[str, tuple[list[str], np.ndarray]],
              val: ValidationSet) -> tuple[float, float]:
    rankings: dict[str, list[RunEntry]] = {}
    losses = []
    for qid, (doc_ids, X) in feats.items():
        logits = X @ scorer.w + scorer.b
        ranked = rank_logits(doc_ids, logits, CROSS_ENCODER)
        rankings[qid] = [
            RunEntry(qid, c.doc_id, i + 1, c.logit) for i, c in enumerate(ranked)
        ]
        rel = val.qrels.relevant(qid)
        y = np.array([1.0 if d in rel else 0.0 for d in doc_ids])
        losses.extend(_losses(X, y, scorer))
    val_loss = math.fsum(losses) / len(losses) if losses else math.nan
    evaluable = [q for q in val.candidates if val.qrels.relevant(q)]
    if not evaluable:
        return val_loss, math.nan
    # every candidate query is evaluated, including ones with no candidates
    run = Run({q: rankings.get(q, []) for q in evaluable})
    mrr, _ = mrr_at_n(run, val.qrels, 10)
    return val_loss, mrr


def _validation_features(val: ValidationSet, index: InvertedIndex):
    feats = {}
    for qid, entries in val.candidates.items():
        if not entries:
            continue
        if qid not in val.queries:
            raise DataError(f"validation candidates reference unknown query {qid!r}")
        q_tokens = tokenize(val.queries[qid].text)
        doc_ids = [e.doc_id for e in entries]
        feats[qid] = (doc_ids, np.stack([encode_tokens(q_tokens, d, index) for d in doc_ids]))
    return feats


def encode_pairs(pairs: Sequence[TrainingPair], queries: QuerySet | Mapping,
                 index: InvertedIndex) -> tuple[np.ndarray, np.ndarray]:
    tok_cache: dict[str, list[str]] = {}
    rows = []
    for p in pairs:
        if p.query_id not in tok_cache:
            tok_cache[p.query_id] = tokenize(queries[p.query_id].text)
        rows.append(encode_tokens(tok_cache[p.query_id], p.doc_id, index))
    y = np.array([p.label for p in pairs], dtype=np.float64)
    return np.stack(rows), y


def train(initial: LinearScorer, data: Sequence[TrainingPair], validation: ValidationSet | None,
          config: TrainConfig, queries: QuerySet | Mapping, collection: Mapping,
          index: InvertedIndex) -> tuple[LinearScorer, TrainHistory]:
    """Fit ``initial`` on ``data`` and return the best-validation scorer.

    Each epoch reshuffles the data with a generator seeded by
    ``(config.seed, epoch)`` and applies ``w -= lr * grad`` per mini-batch.
    Training stops once validation MRR@10 has not improved for
    ``config.patience`` consecutive epochs. Without a validation set every
    epoch runs and the final weights are returned.
    """
    if not data:
        raise ValueError("no training data")
    for p in data:
        _check_label(p.label)
    check_pairs_resolve(data, queries, collection)
    n_pos = sum(p.label for p in data)
    if 2 * n_pos != len(data):
        logger.warning("training data is unbalanced: %d positives, %d negatives",
                       n_pos, len(data) - n_pos)

    X, y = encode_pairs(data, queries, index)
    val_feats = _validation_features(validation, index) if validation is not None else None

    scorer = initial.copy()
    history = TrainHistory(initial_loss=math.fsum(_losses(X, y, scorer)) / len(y))
    best = scorer.copy()
    best_mrr = -math.inf
    stale = 0
    lr = config.learning_rate
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            gw, gb = _gradient(X[idx], y[idx], scorer)
            scorer = LinearScorer(scorer.w - lr * gw, scorer.b - lr * gb)
        train_loss = math.fsum(_losses(X, y, scorer)) / len(y)
        if val_feats is not None:
            val_loss, val_mrr = _validate(scorer, val_feats, validation)
        else:
            val_loss, val_mrr = math.nan, math.nan
        history.records.append(EpochRecord(epoch, train_loss, val_loss, val_mrr))
        logger.info("epoch %d: train_loss=%.6f val_loss=%.6f val_mrr10=%.4f",
                    epoch, train_loss, val_loss, val_mrr)

        if val_feats is None or math.isnan(val_mrr):
            best, history.best_epoch = scorer.copy(), epoch
            continue
        if val_mrr > best_mrr:
            best, best_mrr, history.best_epoch, stale = scorer.copy(), val_mrr, epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                history.stopped_early = epoch < config.epochs
                break
    return best, history
