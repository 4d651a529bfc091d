"""Okapi BM25 over an in-memory inverted index."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from .corpus import Collection, Document, PathLike, RunEntry
from .text import CorpusStats, idf, tokenize

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass(frozen=True)
class InvertedIndex:
    postings: Mapping[str, list[tuple[str, int]]]
    doc_len: Mapping[str, int]
    stats: CorpusStats
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    # per-document term counts, kept for direct scoring and feature encoding
    doc_tf: Mapping[str, Mapping[str, int]] = field(default_factory=dict, repr=False)
    doc_tokens: Mapping[str, list[str]] = field(default_factory=dict, repr=False)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_len

    @property
    def N(self) -> int:
        return self.stats.N

    def idf(self, term: str) -> float:
        return idf(self.stats, term)

    def term_weight(self, tf: int, dl: int) -> float:
        if tf == 0:
            return 0.0
        norm = 1.0 - self.b + self.b * dl / self.stats.avgdl
        return tf * (self.k1 + 1.0) / (tf + self.k1 * norm)


def build_index(collection: Collection | Mapping[str, Document], k1: float = DEFAULT_K1,
                b: float = DEFAULT_B) -> InvertedIndex:
    if not (k1 >= 0 and math.isfinite(k1)):
        raise ValueError(f"k1 must be finite and >= 0, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    doc_tokens = {did: tokenize(doc.text) for did, doc in collection.items()}
    doc_tf = {did: dict(Counter(toks)) for did, toks in doc_tokens.items()}
    postings: dict[str, list[tuple[str, int]]] = {}
    for did in sorted(doc_tf):
        for term, tf in doc_tf[did].items():
            postings.setdefault(term, []).append((did, tf))
    return InvertedIndex(
        postings=postings,
        doc_len={did: len(t) for did, t in doc_tokens.items()},
        stats=CorpusStats.from_token_lists(doc_tokens.values()),
        k1=k1,
        b=b,
        doc_tf=doc_tf,
        doc_tokens=doc_tokens,
    )


def _query_terms(query: list[str]) -> list[str]:
    # each distinct term counts once; fixed order keeps float sums reproducible
    return sorted(set(query))


def bm25_score(index: InvertedIndex, query: list[str], doc_id: str) -> float:
    if doc_id not in index.doc_len:
        raise KeyError(f"document {doc_id!r} is not indexed")
    tf = index.doc_tf[doc_id]
    dl = index.doc_len[doc_id]
    score = 0.0
    for term in _query_terms(query):
        f = tf.get(term, 0)
        if f:
            score += index.idf(term) * index.term_weight(f, dl)
    return score


def score_all(index: InvertedIndex, query: list[str]) -> dict[str, float]:
    """Term-at-a-time accumulation; only documents sharing a term appear."""
    acc: dict[str, float] = {}
    for term in _query_terms(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        w = index.idf(term)
        for did, f in plist:
            acc[did] = acc.get(did, 0.0) + w * index.term_weight(f, index.doc_len[did])
    return acc


def retrieve_topk(index: InvertedIndex, query_text: str, k: int = 10,
                  query_id: str = "q") -> list[RunEntry]:
    """Top ``k`` documents with positive BM25 score, ties broken by doc id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if index.N == 0:
        raise ValueError("cannot retrieve from an empty index")
    scores = score_all(index, tokenize(query_text))
    ranked = sorted(((d, s) for d, s in scores.items() if s > 0), key=lambda p: (-p[1], p[0]))
    return [RunEntry(query_id, d, i + 1, s) for i, (d, s) in enumerate(ranked[:k])]


def save_index(index: InvertedIndex, path: PathLike) -> None:
    payload = {
        "k1": index.k1,
        "b": index.b,
        "doc_tokens": index.doc_tokens,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_index(path: PathLike) -> InvertedIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    # token lists survive a space join unchanged, so rebuilding is exact
    coll = {d: Document(d, " ".join(t)) for d, t in payload["doc_tokens"].items()}
    return build_index(coll, payload["k1"], payload["b"])
