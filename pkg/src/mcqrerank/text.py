"""Tokenization and corpus statistics shared by BM25 and the feature encoder."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

# letters and digits of any script; underscore is a separator
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every run of non-alphanumeric characters.

    >>> tokenize("Green-Tea benefits!")
    ['green', 'tea', 'benefits']
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class CorpusStats:
    """Document count, document frequencies and mean document length."""

    N: int
    df: Mapping[str, int] = field(default_factory=dict)
    avgdl: float = 0.0

    @classmethod
    def from_token_lists(cls, docs: Iterable[list[str]]) -> "CorpusStats":
        df: Counter[str] = Counter()
        n = 0
        total = 0
        for tokens in docs:
            n += 1
            total += len(tokens)
            df.update(set(tokens))
        avgdl = total / n if n else 0.0
        return cls(N=n, df=dict(df), avgdl=avgdl)


def idf(stats: CorpusStats, term: str) -> float:
    """Plus-one Robertson IDF, ``ln(1 + (N - df + 0.5) / (df + 0.5))``.

    Always positive, so BM25 scores never go negative. Unseen terms get df=0.
    """
    if stats.N <= 0:
        raise ValueError("idf is undefined for an empty corpus")
    df = stats.df.get(term, 0)
    return math.log(1.0 + (stats.N - df + 0.5) / (df + 0.5))
