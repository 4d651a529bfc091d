"""
Evaluation and significance
===========================

Compare BM25 with the trained reranker on held-out queries and test whether
the gap could be chance.
"""
from mcqrerank.metrics import format_table
from mcqrerank.pipeline import run_experiment
from mcqrerank.synthetic import make_benchmark
from mcqrerank.training import TrainConfig

bench = make_benchmark(seed=0)
result = run_experiment(bench, config=TrainConfig(learning_rate=0.02, seed=0), iterations=10000)

###############################################################################
# Recall@k, MRR@10 and ROUGE-L of the top passage against a reference answer.
print(format_table([result.bm25, result.cross_encoder, result.mcqa]))

###############################################################################
# Paired sign-flip permutation test over per-query scores.
print(f"\nRecall@1 p = {result.p_recall1:.4f}")
print(f"MRR@10   p = {result.p_mrr10:.4f}")

###############################################################################
# Per-query view: where does the reranker still miss?
misses = [q for q, v in result.cross_encoder.per_query.items() if v["recall@1"] == 0]
print(len(misses), "test queries without the answer at rank 1, e.g.", misses[:3])
