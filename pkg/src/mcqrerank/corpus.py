"""Passages, queries, judgments, runs and training pairs, plus their file formats.

Formats:

* collection / queries: ``id<TAB>text`` per line
* qrels: ``query_id 0 doc_id grade`` (TREC)
* run: ``query_id Q0 doc_id rank score tag`` (TREC, score with 6 decimals)
* training pairs: JSONL objects ``{"query_id", "doc_id", "label"}``
* reference answers: ``query_id<TAB>answer``
"""

from __future__ import annotations

import json
import math
import os
import random
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from typing import Iterable, Sequence

PathLike = str | os.PathLike


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class Query:
    id: str
    text: str


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    doc_id: str
    rank: int
    score: float


@dataclass(frozen=True)
class TrainingPair:
    query_id: str
    doc_id: str
    label: int


class _TextStore(Mapping):
    """Ordered, immutable id -> record store."""

    record_type: type = Document

    def __init__(self, records: Iterable = ()):
        items: dict[str, object] = {}
        for rec in records:
            _check_id(rec.id)
            if rec.id in items:
                raise DataError(f"duplicate id {rec.id!r}")
            items[rec.id] = rec
        self._items = items

    def __getitem__(self, key):
        return self._items[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self)} records)"


class Collection(_TextStore):
    record_type = Document


class QuerySet(_TextStore):
    record_type = Query


def _check_id(ident: str) -> None:
    if not ident or any(c.isspace() for c in ident):
        raise DataError(f"invalid id {ident!r}: must be a non-empty token without whitespace")


class Qrels(Mapping):
    """(query_id, doc_id) -> integer grade. Grade > 0 means relevant."""

    def __init__(self, judgments: Mapping[tuple[str, str], int] | None = None):
        judgments = dict(judgments or {})
        for key, grade in judgments.items():
            if int(grade) != grade or grade < 0:
                raise DataError(f"grade for {key} must be a non-negative integer, got {grade!r}")
        self._j = judgments
        self._relevant: dict[str, set[str]] = {}
        for (qid, did), grade in judgments.items():
            if grade > 0:
                self._relevant.setdefault(qid, set()).add(did)

    def __getitem__(self, key):
        return self._j[key]

    def __iter__(self):
        return iter(self._j)

    def __len__(self) -> int:
        return len(self._j)

    def relevant(self, query_id: str) -> set[str]:
        """Doc ids judged relevant (grade >= 1) for ``query_id``."""
        return self._relevant.get(query_id, set())

    def query_ids(self) -> list[str]:
        return sorted({qid for qid, _ in self._j})

    def positives(self) -> list[TrainingPair]:
        return [TrainingPair(q, d, 1) for (q, d), g in sorted(self._j.items()) if g > 0]


class Run(Mapping):
    """query_id -> ranked list of RunEntry."""

    def __init__(self, entries: Mapping[str, Sequence[RunEntry]] | None = None):
        self._by_query = {qid: list(lst) for qid, lst in (entries or {}).items()}
        for qid, lst in self._by_query.items():
            validate_ranking(qid, lst)

    def __getitem__(self, qid):
        return self._by_query[qid]

    def __iter__(self):
        return iter(self._by_query)

    def __len__(self) -> int:
        return len(self._by_query)

    def doc_ids(self, query_id: str) -> list[str]:
        return [e.doc_id for e in self._by_query.get(query_id, [])]

    @classmethod
    def from_scores(cls, query_id: str, scored: Sequence[tuple[str, float]]) -> list[RunEntry]:
        """Rank ``(doc_id, score)`` pairs: score descending, doc_id ascending on ties."""
        ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
        return [RunEntry(query_id, d, i + 1, float(s)) for i, (d, s) in enumerate(ordered)]


def validate_ranking(query_id: str, entries: Sequence[RunEntry]) -> None:
    seen: set[str] = set()
    prev = math.inf
    for i, e in enumerate(entries, start=1):
        if e.query_id != query_id:
            raise DataError(f"entry for {e.query_id!r} filed under query {query_id!r}")
        if e.rank != i:
            raise DataError(f"query {query_id!r}: expected rank {i}, found {e.rank}")
        if not math.isfinite(e.score):
            raise DataError(f"query {query_id!r}: non-finite score at rank {i}")
        if e.score > prev:
            raise DataError(f"query {query_id!r}: score increases at rank {i}")
        if e.doc_id in seen:
            raise DataError(f"query {query_id!r}: doc {e.doc_id!r} listed twice")
        seen.add(e.doc_id)
        prev = e.score


# --------------------------------------------------------------------------
# readers / writers
# --------------------------------------------------------------------------


def _read_lines(path: PathLike) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def _read_tsv(path: PathLike, factory) -> list:
    records = []
    for lineno, line in _read_lines(path):
        if "\t" not in line:
            raise DataError(f"{path}:{lineno}: malformed line, expected id<TAB>text")
        ident, text = line.split("\t", 1)
        try:
            _check_id(ident)
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        records.append(factory(ident, text))
    return records


def load_collection(path: PathLike) -> Collection:
    return Collection(_read_tsv(path, Document))


def load_queries(path: PathLike) -> QuerySet:
    return QuerySet(_read_tsv(path, Query))


def write_tsv(records: Iterable, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            if "\n" in rec.text or "\t" in rec.text:
                raise DataError(f"text of {rec.id!r} contains a TAB or newline")
            fh.write(f"{rec.id}\t{rec.text}\n")


def load_qrels(path: PathLike) -> Qrels:
    judgments: dict[tuple[str, str], int] = {}
    for lineno, line in _read_lines(path):
        cols = line.split()
        if len(cols) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 columns, found {len(cols)}")
        qid, _, did, grade_s = cols
        try:
            grade = int(grade_s)
        except ValueError:
            raise DataError(f"{path}:{lineno}: grade {grade_s!r} is not an integer") from None
        if grade < 0:
            raise DataError(f"{path}:{lineno}: negative grade {grade}")
        if (qid, did) in judgments:
            raise DataError(f"{path}:{lineno}: duplicate judgment for ({qid}, {did})")
        judgments[(qid, did)] = grade
    return Qrels(judgments)


def write_qrels(qrels: Qrels, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (qid, did), grade in qrels.items():
            fh.write(f"{qid} 0 {did} {grade}\n")


def write_run(run: Run, tag: str, path: PathLike) -> None:
    """Write ``run`` in TREC format; queries are emitted in run order."""
    if not tag or any(c.isspace() for c in tag):
        raise DataError(f"invalid run tag {tag!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, entries in run.items():
            validate_ranking(qid, entries)
            for e in entries:
                fh.write(f"{qid} Q0 {e.doc_id} {e.rank} {e.score:.6f} {tag}\n")


def load_run(path: PathLike) -> Run:
    """Read a TREC run. Ranks must form 1..n per query with no gaps."""
    by_query: dict[str, list[RunEntry]] = {}
    for lineno, line in _read_lines(path):
        cols = line.split()
        if len(cols) != 6:
            raise DataError(f"{path}:{lineno}: expected 6 columns, found {len(cols)}")
        qid, _, did, rank_s, score_s, _tag = cols
        try:
            entry = RunEntry(qid, did, int(rank_s), float(score_s))
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad rank or score") from None
        by_query.setdefault(qid, []).append(entry)
    for entries in by_query.values():
        entries.sort(key=lambda e: (e.rank, e.doc_id))
    try:
        return Run(by_query)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def read_run_tag(path: PathLike) -> str | None:
    for _, line in _read_lines(path):
        return line.split()[-1]
    return None


def load_training_pairs(path: PathLike) -> list[TrainingPair]:
    pairs = []
    for lineno, line in _read_lines(path):
        try:
            obj = json.loads(line)
            pair = TrainingPair(str(obj["query_id"]), str(obj["doc_id"]), obj["label"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad training pair ({exc})") from None
        if pair.label not in (0, 1) or isinstance(pair.label, bool):
            raise DataError(f"{path}:{lineno}: label must be 0 or 1")
        pairs.append(pair)
    return pairs


def write_training_pairs(pairs: Iterable[TrainingPair], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            obj = {"query_id": p.query_id, "doc_id": p.doc_id, "label": p.label}
            fh.write(json.dumps(obj) + "\n")


def load_references(path: PathLike) -> dict[str, str]:
    refs: dict[str, str] = {}
    for rec in _read_tsv(path, Query):
        if rec.id in refs:
            raise DataError(f"duplicate reference for query {rec.id!r}")
        refs[rec.id] = rec.text
    return refs


def write_references(refs: Mapping[str, str], path: PathLike) -> None:
    write_tsv((Query(q, a) for q, a in refs.items()), path)


def check_pairs_resolve(pairs: Iterable[TrainingPair], queries: Mapping, collection: Mapping) -> None:
    for p in pairs:
        if p.query_id not in queries:
            raise DataError(f"training pair references unknown query {p.query_id!r}")
        if p.doc_id not in collection:
            raise DataError(f"training pair references unknown document {p.doc_id!r}")


def build_balanced_training_set(
    qrels: Qrels, negatives: Sequence[TrainingPair], seed: int
) -> list[TrainingPair]:
    """All positives from ``qrels`` plus an equal number of sampled negatives, shuffled."""
    if len(qrels) == 0:
        raise ValueError("qrels is empty")
    if any(n.label != 0 for n in negatives):
        raise ValueError("negatives must all carry label 0")
    positives = qrels.positives()
    if len(negatives) < len(positives):
        raise ValueError(
            f"need {len(positives)} negatives to balance {len(positives)} positives, "
            f"got {len(negatives)}"
        )
    rng = random.Random(seed)
    chosen = rng.sample(list(negatives), len(positives))
    out = positives + chosen
    rng.shuffle(out)
    return out
