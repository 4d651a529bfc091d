"""Ranking metrics (Recall@k, MRR@n), ROUGE-L, and a paired permutation test.

All aggregates are macro averages over queries so that the per-query values
can feed the significance test directly.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import PathLike, Qrels, Run
from .text import tokenize

logger = logging.getLogger(__name__)

DEFAULT_BETA = 1.2


def _evaluable(run: Run, qrels: Qrels, query_ids: Iterable[str] | None) -> list[str]:
    qids = list(run) if query_ids is None else list(query_ids)
    kept = []
    for qid in qids:
        if qrels.relevant(qid):
            kept.append(qid)
        else:
            logger.warning("query %s has no relevant judgments; skipped", qid)
    if not kept:
        raise ValueError("no query with relevance judgments to evaluate")
    return kept


def _macro(per_query: Mapping[str, float]) -> float:
    return math.fsum(per_query.values()) / len(per_query)


def recall_at_k(run: Run, qrels: Qrels, k: int,
                query_ids: Iterable[str] | None = None) -> tuple[float, dict[str, float]]:
    """Fraction of each query's relevant documents found in its top ``k``.

    ``query_ids`` defaults to the queries present in ``run``; ids absent from
    the run count as empty rankings.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_query = {}
    for qid in _evaluable(run, qrels, query_ids):
        rel = qrels.relevant(qid)
        top = run.doc_ids(qid)[:k]
        per_query[qid] = sum(1 for d in top if d in rel) / len(rel)
    return _macro(per_query), per_query


def mrr_at_n(run: Run, qrels: Qrels, n: int,
             query_ids: Iterable[str] | None = None) -> tuple[float, dict[str, float]]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    per_query = {}
    for qid in _evaluable(run, qrels, query_ids):
        rel = qrels.relevant(qid)
        rr = 0.0
        for rank, d in enumerate(run.doc_ids(qid)[:n], start=1):
            if d in rel:
                rr = 1.0 / rank
                break
        per_query[qid] = rr
    return _macro(per_query), per_query


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, beta: float = DEFAULT_BETA) -> float:
    """LCS-based F-measure; ``beta > 1`` weights recall over precision."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(cand)
    r = lcs / len(ref)
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def rouge_l_for_run(run: Run, collection: Mapping, references: Mapping[str, str],
                    beta: float = DEFAULT_BETA,
                    query_ids: Iterable[str] | None = None) -> tuple[float, dict[str, float]]:
    """ROUGE-L of each query's rank-1 passage against its reference answer.

    Queries without a reference are left out; a query with a reference but an
    empty ranking scores 0.
    """
    qids = list(run) if query_ids is None else list(query_ids)
    per_query = {}
    for qid in qids:
        if qid not in references:
            continue
        top = run.doc_ids(qid)[:1]
        text = collection[top[0]].text if top else ""
        per_query[qid] = rouge_l(text, references[qid], beta)
    if not per_query:
        raise ValueError("no evaluated query has a reference answer")
    return _macro(per_query), per_query


def paired_permutation_test(a: Mapping[str, float], b: Mapping[str, float],
                            iterations: int = 10000, seed: int = 0) -> float:
    """Two-sided sign-flip test on the per-query differences ``a - b``.

    Returns ``(1 + hits) / (1 + iterations)`` where a hit is a random sign
    assignment whose absolute mean difference reaches the observed one.
    """
    if set(a) != set(b):
        raise ValueError("per-query values must cover the same query ids")
    if iterations < 1000:
        raise ValueError("use at least 1000 iterations")
    if not a:
        raise ValueError("no queries to compare")
    qids = sorted(a)
    diff = np.array([a[q] - b[q] for q in qids], dtype=np.float64)
    observed = abs(diff.mean())
    # guard against summation-order noise when comparing equal means
    threshold = observed - 1e-12 * max(1.0, observed)
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, min(iterations, 2_000_000 // len(diff)))
    done = 0
    while done < iterations:
        m = min(chunk, iterations - done)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(m, len(diff)))
        hits += int(np.count_nonzero(np.abs((signs * diff).mean(axis=1)) >= threshold))
        done += m
    return (1 + hits) / (1 + iterations)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

TABLE_COLUMNS = ("Model", "Mode", "Recall@1", "Recall@5", "MRR@10", "ROUGE-L")


@dataclass
class MetricReport:
    model: str
    mode: str
    recall_at_1: float
    recall_at_5: float
    mrr_at_10: float
    rouge_l: float | None
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    cutoffs: tuple[int, int, int] = (1, 5, 10)

    def row(self) -> list[str]:
        rl = "n/a" if self.rouge_l is None else f"{self.rouge_l:.4f}"
        return [self.model, self.mode, f"{self.recall_at_1:.4f}", f"{self.recall_at_5:.4f}",
                f"{self.mrr_at_10:.4f}", rl]

    def header(self) -> list[str]:
        r1, r5, n = self.cutoffs
        return ["Model", "Mode", f"Recall@{r1}", f"Recall@{r5}", f"MRR@{n}", "ROUGE-L"]


def evaluate_run(run: Run, qrels: Qrels, *, model: str = "run", mode: str = "",
                 collection: Mapping | None = None, references: Mapping[str, str] | None = None,
                 beta: float = DEFAULT_BETA, cutoffs: tuple[int, int, int] = (1, 5, 10),
                 query_ids: Iterable[str] | None = None) -> MetricReport:
    k1, k2, n = cutoffs
    qids = None if query_ids is None else list(query_ids)
    r1, pq1 = recall_at_k(run, qrels, k1, qids)
    r5, pq5 = recall_at_k(run, qrels, k2, qids)
    mrr, pqm = mrr_at_n(run, qrels, n, qids)
    per_query = {
        q: {f"recall@{k1}": pq1[q], f"recall@{k2}": pq5[q], f"rr@{n}": pqm[q]} for q in pq1
    }
    rl = None
    if references and collection is not None:
        rl, pqr = rouge_l_for_run(run, collection, references, beta, list(pq1))
        for q, v in pqr.items():
            per_query[q]["rouge_l"] = v
    return MetricReport(model, mode, r1, r5, mrr, rl, per_query, cutoffs)


def format_table(reports: Sequence[MetricReport]) -> str:
    """Aligned plain-text table, one row per system."""
    if not reports:
        return ""
    rows = [reports[0].header()] + [r.row() for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]

    def fmt(row):
        cells = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))]
        return "  ".join(cells).rstrip()

    rule = "-" * len(fmt(rows[0]))
    return "\n".join([fmt(rows[0]), rule, *(fmt(r) for r in rows[1:])]) + "\n"


def write_report_csv(reports: Sequence[MetricReport], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(reports[0].header())
        for r in reports:
            rl = "" if r.rouge_l is None else repr(r.rouge_l)
            w.writerow([r.model, r.mode, repr(r.recall_at_1), repr(r.recall_at_5),
                        repr(r.mrr_at_10), rl])


def write_per_query_csv(report: MetricReport, path: PathLike) -> None:
    cols = sorted({c for v in report.per_query.values() for c in v})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_id", *cols])
        for qid in sorted(report.per_query):
            vals = report.per_query[qid]
            w.writerow([qid, *(repr(vals[c]) if c in vals else "" for c in cols)])


def read_per_query_csv(path: PathLike, column: str) -> dict[str, float]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ValueError(f"{path}: no column {column!r}")
        out = {}
        for row in reader:
            if row[column] == "":
                continue
            out[row["query_id"]] = float(row[column])
    return out
