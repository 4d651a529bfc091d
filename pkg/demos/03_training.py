"""
Training the reranker on hard negatives
=======================================

Mine BM25 negatives for a synthetic benchmark, balance them against the
positives and fit the scorer with mini-batch gradient descent.
"""
from mcqrerank import LinearScorer, TrainConfig, build_index, train
from mcqrerank.pipeline import mine_training_set, retrieve_run
from mcqrerank.synthetic import make_benchmark
from mcqrerank.training import ValidationSet

bench = make_benchmark(seed=0)
index = build_index(bench.collection)
print(len(bench.collection), "passages,", len(bench.queries), "queries")

###############################################################################
# Negatives come from the BM25 top 10 with judged positives removed.
pairs = mine_training_set(index, bench.train_qrels, bench.queries, per_query=3, seed=0)
print(sum(p.label for p in pairs), "positives,", sum(1 - p.label for p in pairs), "negatives")

###############################################################################
# Validation MRR@10 picks the best epoch. Features are not rescaled, so a
# smaller step than the default keeps the descent smooth.
val_queries = bench.split_queries(bench.val_qrels)
validation = ValidationSet(val_queries, bench.val_qrels, retrieve_run(index, val_queries, 10))
config = TrainConfig(epochs=7, learning_rate=0.02, seed=0)
scorer, history = train(LinearScorer.zeros(), pairs, validation, config,
                        bench.queries, bench.collection, index)

print(f"initial loss {history.initial_loss:.4f}")
for rec in history.records:
    print(f"epoch {rec.epoch}: train {rec.train_loss:.4f}  val {rec.val_loss:.4f}  MRR@10 {rec.val_mrr10:.4f}")
print("kept epoch", history.best_epoch, "weights", scorer.w.round(3), "bias", round(scorer.b, 3))
