"""BM25 retrieval and a linear reranker usable as a cross-encoder or an MCQA head."""

from .corpus import (
    Collection,
    DataError,
    Document,
    Qrels,
    Query,
    QuerySet,
    Run,
    RunEntry,
    TrainingPair,
    build_balanced_training_set,
    load_collection,
    load_qrels,
    load_queries,
    load_run,
    write_run,
)
from .metrics import lcs_length, mrr_at_n, paired_permutation_test, recall_at_k, rouge_l
from .retriever import InvertedIndex, bm25_score, build_index, retrieve_topk
from .scorer import (
    LinearScorer,
    encode,
    raw_score,
    rerank_cross_encoder,
    rerank_mcqa,
    sigmoid,
    softmax,
)
from .text import CorpusStats, idf, tokenize
from .training import (
    TrainConfig,
    bce_with_logits,
    batch_loss,
    gradient,
    sample_hard_negatives,
    train,
)

__version__ = "0.1.0"
