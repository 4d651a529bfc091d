"""
BM25 retrieval over a tiny collection
=====================================

Build an inverted index, inspect its statistics and pull the top passages
for a query.
"""
from mcqrerank import Collection, Document, build_index, retrieve_topk, bm25_score, tokenize

###############################################################################
# A collection is a mapping from passage id to passage. Ids must be unique.
coll = Collection([
    Document("d1", "Green tea improves health."),
    Document("d2", "Black tea and green tea are both popular."),
    Document("d3", "Coffee improves focus in the morning."),
    Document("d4", "Health benefits of green tea include antioxidants."),
])

###############################################################################
# The index keeps postings sorted by doc id plus the corpus statistics
# needed for scoring.
index = build_index(coll, k1=1.2, b=0.75)
print("documents:", index.stats.N, "avg length:", index.stats.avgdl)
print("postings for 'tea':", index.postings["tea"])
print("idf('tea') =", round(index.idf("tea"), 4), " idf('coffee') =", round(index.idf("coffee"), 4))

###############################################################################
# Retrieval returns only passages sharing at least one query term, best first.
# Equal scores fall back to doc id order.
for entry in retrieve_topk(index, "green tea health", k=3, query_id="q1"):
    print(entry.rank, entry.doc_id, f"{entry.score:.4f}")

###############################################################################
# Single-passage scoring gives the same number as the ranked list.
print(bm25_score(index, tokenize("green tea health"), "d4"))
