"""
Two heads, one scorer
=====================

A linear scorer can be read as a cross-encoder (sigmoid per passage) or as a
multiple-choice head (softmax across the candidate set). Both heads are
monotone in the same logit, so the orderings match.
"""
import numpy as np

from mcqrerank import Collection, Document, LinearScorer, Query, build_index, encode
from mcqrerank.scorer import FEATURE_NAMES, rerank_cross_encoder, rerank_mcqa

coll = Collection([
    Document("a", "the capital of france is paris"),
    Document("b", "paris is a city in texas as well"),
    Document("c", "france exports wine and cheese"),
    Document("d", "berlin is the capital of germany"),
])
index = build_index(coll)
query = Query("q", "capital of france")

###############################################################################
# Each (query, passage) pair becomes a small feature vector.
for name, value in zip(FEATURE_NAMES, encode(query, coll["a"], index)):
    print(f"{name:>20s} {value:8.4f}")

###############################################################################
# Any weight vector works for the comparison; here a random one.
rng = np.random.default_rng(0)
scorer = LinearScorer(rng.normal(size=len(FEATURE_NAMES)), 0.1)
cands = list(coll.values())

ce = rerank_cross_encoder(scorer, query, cands, index)
mc = rerank_mcqa(scorer, query, cands, index)
print("\ndoc  logit     sigmoid   softmax")
for x, y in zip(ce, mc):
    print(f"{x.doc_id:>3s} {x.logit:8.4f} {x.probability:9.4f} {y.probability:9.4f}")

###############################################################################
# Sigmoid probabilities are independent; softmax ones sum to one.
print("softmax total:", sum(c.probability for c in mc))
print("same order:", [c.doc_id for c in ce] == [c.doc_id for c in mc])
