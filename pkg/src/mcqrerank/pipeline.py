"""End-to-end helpers: retrieve, mine negatives, train, rerank, evaluate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .corpus import Collection, Qrels, QuerySet, Run, RunEntry, TrainingPair, build_balanced_training_set
from .metrics import MetricReport, evaluate_run, paired_permutation_test
from .retriever import InvertedIndex, build_index, retrieve_topk
from .scorer import CROSS_ENCODER, RERANKERS, LinearScorer
from .synthetic import Benchmark
from .training import TrainConfig, TrainHistory, ValidationSet, sample_hard_negatives, train

BM25_TAG = "bm25"


def retrieve_run(index: InvertedIndex, queries: Mapping, k: int = 10) -> Run:
    """BM25 top-``k`` for every query; queries with no match get an empty list."""
    return Run({qid: retrieve_topk(index, q.text, k, query_id=qid) for qid, q in queries.items()})


def rerank_run(scorer: LinearScorer, run: Run, queries: Mapping, collection: Mapping,
               index: InvertedIndex, mode: str = CROSS_ENCODER) -> Run:
    """Reorder each query's candidates; the run score becomes the head's probability."""
    if mode not in RERANKERS:
        raise ValueError(f"unknown rerank mode {mode!r}")
    rerank = RERANKERS[mode]
    out = {}
    for qid, entries in run.items():
        if not entries:
            out[qid] = []
            continue
        cands = [collection[e.doc_id] for e in entries]
        ranked = rerank(scorer, queries[qid], cands, index)
        out[qid] = [RunEntry(qid, c.doc_id, i + 1, c.probability) for i, c in enumerate(ranked)]
    return Run(out)


def run_tag(mode: str, scorer: LinearScorer) -> str:
    return f"{mode}-{scorer.fingerprint()}"


def mine_training_set(index: InvertedIndex, qrels: Qrels, queries: Mapping, per_query: int = 3,
                      seed: int = 0, depth: int = 10) -> list[TrainingPair]:
    """Qrels positives balanced against BM25 hard negatives."""
    negatives: list[TrainingPair] = []
    for qid in qrels.query_ids():
        negatives.extend(sample_hard_negatives(index, qrels, queries[qid], per_query, seed, depth))
    return build_balanced_training_set(qrels, negatives, seed)


@dataclass
class ExperimentResult:
    bm25: MetricReport
    cross_encoder: MetricReport
    mcqa: MetricReport
    scorer: LinearScorer
    history: TrainHistory
    runs: dict[str, Run]
    p_recall1: float
    p_mrr10: float


def run_experiment(bench: Benchmark, config: TrainConfig | None = None, k: int = 10,
                   negatives_per_query: int = 3, iterations: int = 10000,
                   seed: int = 0) -> ExperimentResult:
    """Train on the benchmark's train split and compare against BM25 on its test split."""
    config = config or TrainConfig(seed=seed)
    index = build_index(bench.collection)
    data = mine_training_set(index, bench.train_qrels, bench.queries, negatives_per_query, seed, k)
    val_queries = bench.split_queries(bench.val_qrels)
    validation = ValidationSet(val_queries, bench.val_qrels, retrieve_run(index, val_queries, k))
    scorer, history = train(LinearScorer.zeros(), data, validation, config, bench.queries,
                            bench.collection, index)

    test_queries = bench.split_queries(bench.test_qrels)
    first = retrieve_run(index, test_queries, k)
    runs = {
        BM25_TAG: first,
        "cross-encoder": rerank_run(scorer, first, test_queries, bench.collection, index, "cross-encoder"),
        "mcqa": rerank_run(scorer, first, test_queries, bench.collection, index, "mcqa"),
    }
    qids = list(test_queries)

    def report(name, mode, run):
        return evaluate_run(run, bench.test_qrels, model=name, mode=mode,
                            collection=bench.collection, references=bench.references,
                            query_ids=qids)

    base = report("BM25", "Retriever only", runs[BM25_TAG])
    ce = report("Linear reranker", "Cross-encoder", runs["cross-encoder"])
    mc = report("Linear reranker", "MCQA", runs["mcqa"])

    def column(rep, name):
        return {q: v[name] for q, v in rep.per_query.items()}

    p_r1 = paired_permutation_test(column(ce, "recall@1"), column(base, "recall@1"), iterations, seed)
    p_mrr = paired_permutation_test(column(ce, "rr@10"), column(base, "rr@10"), iterations, seed)
    return ExperimentResult(base, ce, mc, scorer, history, runs, p_r1, p_mrr)
