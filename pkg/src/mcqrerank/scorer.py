"""Joint query-passage features, a linear relevance head, and the two reranking adapters.

The same ``LinearScorer`` logits can be normalised two ways:

* cross-encoder: each candidate independently through a sigmoid
* MCQA: the candidate set treated as answer options under a softmax

Both maps are strictly increasing in the logit, so the adapters always agree
on the ordering; only the probability values differ.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Document, PathLike, Query
from .retriever import InvertedIndex, bm25_score
from .text import tokenize

FEATURE_NAMES = (
    "unigram_overlap",
    "idf_overlap",
    "bm25",
    "jaccard",
    "bigram_overlap",
    "query_coverage",
    "log_doc_len",
    "log_query_len",
)
DIM = len(FEATURE_NAMES)
BM25_FEATURE = FEATURE_NAMES.index("bm25")

CROSS_ENCODER = "cross-encoder"
MCQA = "mcqa"
MODES = (CROSS_ENCODER, MCQA)


def _bigrams(tokens: list[str]) -> set[tuple[str, str]]:
    return set(zip(tokens, tokens[1:]))


def encode_tokens(q_tokens: list[str], doc_id: str, index: InvertedIndex) -> np.ndarray:
    if doc_id not in index:
        raise KeyError(f"document {doc_id!r} is not indexed")
    d_tokens = index.doc_tokens[doc_id]
    q_set, d_set = set(q_tokens), set(d_tokens)
    shared = q_set & d_set
    union = q_set | d_set
    return np.array(
        [
            len(shared),
            math.fsum(index.idf(t) for t in sorted(shared)),
            bm25_score(index, q_tokens, doc_id),
            len(shared) / len(union) if union else 0.0,
            len(_bigrams(q_tokens) & _bigrams(d_tokens)),
            len(shared) / len(q_set) if q_set else 0.0,
            math.log1p(len(d_tokens)),
            math.log1p(len(q_tokens)),
        ],
        dtype=np.float64,
    )


def encode(query: Query, doc: Document, index: InvertedIndex) -> np.ndarray:
    """Feature vector for the (query, passage) pair; see ``FEATURE_NAMES``.

    The passage is looked up in ``index`` by id, which also supplies IDF and
    BM25 statistics.
    """
    return encode_tokens(tokenize(query.text), doc.id, index)


@dataclass
class LinearScorer:
    w: np.ndarray = field(default_factory=lambda: np.zeros(DIM))
    b: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).copy()
        self.b = float(self.b)
        if self.w.ndim != 1:
            raise ValueError("w must be a vector")
        if not (np.all(np.isfinite(self.w)) and math.isfinite(self.b)):
            raise ValueError("scorer parameters must be finite")

    @classmethod
    def zeros(cls, dim: int = DIM) -> "LinearScorer":
        return cls(np.zeros(dim), 0.0)

    def copy(self) -> "LinearScorer":
        return LinearScorer(self.w.copy(), self.b)

    def to_text(self) -> str:
        weights = " ".join(format(float(x), ".17g") for x in self.w)
        return f"{len(self.w)}\n{weights}\n{format(self.b, '.17g')}\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearScorer":
        lines = text.splitlines()
        if len(lines) < 3:
            raise ValueError("model file needs 3 lines: dimension, weights, bias")
        dim = int(lines[0])
        w = [float(x) for x in lines[1].split()]
        if len(w) != dim:
            raise ValueError(f"model declares {dim} weights but lists {len(w)}")
        return cls(np.array(w), float(lines[2]))

    def save(self, path: PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path: PathLike) -> "LinearScorer":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:8]


def raw_score(scorer: LinearScorer, fv) -> float:
    fv = np.asarray(fv, dtype=np.float64)
    if fv.shape != scorer.w.shape:
        raise ValueError(f"feature dimension {fv.shape} does not match weights {scorer.w.shape}")
    return float(np.dot(scorer.w, fv) + scorer.b)


def sigmoid(x):
    """Logistic function, split on sign so neither branch overflows."""
    if np.ndim(x) == 0:
        x = float(x)
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        z = math.exp(x)
        return z / (1.0 + z)
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def softmax(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("softmax of an empty list")
    e = np.exp(s - s.max())
    return e / e.sum()


@dataclass(frozen=True)
class ScoredCandidate:
    doc_id: str
    logit: float
    probability: float
    mode: str


def candidate_logits(scorer: LinearScorer, query: Query, candidates: Sequence[Document],
                     index: InvertedIndex) -> np.ndarray:
    if not candidates:
        raise ValueError("no candidates to rerank")
    q_tokens = tokenize(query.text)
    X = np.stack([encode_tokens(q_tokens, d.id, index) for d in candidates])
    if X.shape[1] != scorer.w.shape[0]:
        raise ValueError("feature dimension does not match scorer")
    return X @ scorer.w + scorer.b


def _ranked(doc_ids: Sequence[str], logits: np.ndarray, probs: np.ndarray,
            mode: str) -> list[ScoredCandidate]:
    out = [
        ScoredCandidate(d, float(x), float(p), mode)
        for d, x, p in zip(doc_ids, logits, probs)
    ]
    # probability first; logit resolves float saturation; doc id last
    out.sort(key=lambda c: (-c.probability, -c.logit, c.doc_id))
    return out


def rerank_cross_encoder(scorer: LinearScorer, query: Query, candidates: Sequence[Document],
                         index: InvertedIndex) -> list[ScoredCandidate]:
    """Score each candidate independently and squash its logit with a sigmoid."""
    logits = candidate_logits(scorer, query, candidates, index)
    return _ranked([d.id for d in candidates], logits, sigmoid(logits), CROSS_ENCODER)


def rerank_mcqa(scorer: LinearScorer, query: Query, candidates: Sequence[Document],
                index: InvertedIndex) -> list[ScoredCandidate]:
    """Treat the candidates as answer options; probabilities are a softmax over them."""
    logits = candidate_logits(scorer, query, candidates, index)
    return _ranked([d.id for d in candidates], logits, softmax(logits), MCQA)


RERANKERS = {CROSS_ENCODER: rerank_cross_encoder, MCQA: rerank_mcqa}


def rank_logits(doc_ids: Sequence[str], logits, mode: str = CROSS_ENCODER) -> list[ScoredCandidate]:
    """Rank precomputed logits with either head; used by training and tests."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    logits = np.asarray(logits, dtype=np.float64)
    norm = sigmoid if mode == CROSS_ENCODER else softmax
    return _ranked(doc_ids, logits, np.atleast_1d(norm(logits)), mode)
