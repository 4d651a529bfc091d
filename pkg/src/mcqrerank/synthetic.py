"""Small synthetic retrieval benchmark with planted relevance.

Every query carries three rare topic words. Its relevant passage is a longer
text containing all three as a contiguous phrase; its distractors are short
passages that repeat two of the three words at random positions. BM25 length
normalisation and term-frequency saturation tend to favour the distractors,
while coverage and bigram features separate the two kinds cleanly. Filler
passages drawn from a shared common vocabulary pad the collection.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    Collection,
    Document,
    Qrels,
    Query,
    QuerySet,
    write_qrels,
    write_references,
    write_tsv,
)

COMMON = (
    "the of and to in is for on with as by at from that this are be it an or "
    "was which can more most about what how when why does use used many some "
    "also other such into than time people world health water food energy work"
).split()

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class Benchmark:
    collection: Collection
    queries: QuerySet
    train_qrels: Qrels
    val_qrels: Qrels
    test_qrels: Qrels
    references: dict[str, str]

    def split_queries(self, qrels: Qrels) -> QuerySet:
        return QuerySet(self.queries[q] for q in qrels.query_ids())


def _pseudo_words(rng: random.Random, n: int) -> list[str]:
    seen: set[str] = set(COMMON)
    out = []
    while len(out) < n:
        w = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _filler(rng: random.Random, n: int) -> list[str]:
    return [rng.choice(COMMON) for _ in range(n)]


def make_benchmark(seed: int = 0, n_train: int = 120, n_val: int = 20, n_test: int = 60,
                   distractors: int = 3, n_filler: int = 150) -> Benchmark:
    rng = random.Random(seed)
    n_q = n_train + n_val + n_test
    vocab = iter(_pseudo_words(rng, 7 * n_q))
    docs: list[Document] = []
    queries: list[Query] = []
    judgments: list[dict[tuple[str, str], int]] = [{}, {}, {}]
    references: dict[str, str] = {}

    for i in range(n_q):
        qid = f"q{i:04d}"
        topic = [next(vocab) for _ in range(3)]
        answer = [next(vocab) for _ in range(4)]
        q_words = _filler(rng, rng.randint(1, 2)) + topic
        queries.append(Query(qid, " ".join(q_words)))

        rel_id = f"{qid}-rel"
        before = _filler(rng, rng.randint(2, 20))
        after = _filler(rng, rng.randint(2, 20))
        phrase = list(topic)
        if rng.random() < 0.3:
            del phrase[rng.randrange(3)]
        body = before + after
        if rng.random() < 0.35:
            # topic words scattered through the passage instead of a phrase
            for t in phrase:
                body.insert(rng.randrange(len(body) + 1), t)
            phrase = []
        cut = len(before) if phrase else rng.randrange(len(body) + 1)
        answer_clause = phrase + ["is"] + answer
        docs.append(Document(rel_id, " ".join(body[:cut] + answer_clause + body[cut:])))
        references[qid] = " ".join(topic + ["is"] + answer)

        for j in range(rng.randint(1, distractors)):
            picked = rng.sample(topic, 3 if rng.random() < 0.35 else 2)
            words = _filler(rng, rng.randint(4, 40))
            for t in picked:
                for _ in range(rng.choice((1, 2, 3))):
                    words.insert(rng.randrange(len(words) + 1), t)
            docs.append(Document(f"{qid}-neg{j}", " ".join(words)))

        split = 0 if i < n_train else 1 if i < n_train + n_val else 2
        judgments[split][(qid, rel_id)] = 1

    for k in range(n_filler):
        docs.append(Document(f"fill{k:04d}", " ".join(_filler(rng, rng.randint(8, 30)))))

    rng.shuffle(docs)
    return Benchmark(
        collection=Collection(docs),
        queries=QuerySet(queries),
        train_qrels=Qrels(judgments[0]),
        val_qrels=Qrels(judgments[1]),
        test_qrels=Qrels(judgments[2]),
        references=references,
    )


def write_benchmark(bench: Benchmark, directory: str | Path) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "collection": d / "collection.tsv",
        "queries": d / "queries.tsv",
        "train_qrels": d / "qrels.train.txt",
        "val_qrels": d / "qrels.val.txt",
        "test_qrels": d / "qrels.test.txt",
        "references": d / "references.tsv",
    }
    write_tsv(bench.collection.values(), paths["collection"])
    write_tsv(bench.queries.values(), paths["queries"])
    write_qrels(bench.train_qrels, paths["train_qrels"])
    write_qrels(bench.val_qrels, paths["val_qrels"])
    write_qrels(bench.test_qrels, paths["test_qrels"])
    write_references(bench.references, paths["references"])
    return paths
