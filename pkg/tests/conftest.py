import sys
from pathlib import Path

import pytest

from mcqrerank.corpus import Collection, Document, Qrels, Query

sys.path.insert(0, str(Path(__file__).parent))

THREE_DOCS = {
    "d1": "green tea improves health",
    "d2": "black tea and green tea",
    "d3": "coffee improves focus",
}


@pytest.fixture
def three_docs():
    return Collection(Document(k, v) for k, v in THREE_DOCS.items())


@pytest.fixture
def write(tmp_path):
    def _write(name, content):
        p = tmp_path / name
        p.write_text(content, encoding="utf-8")
        return p

    return _write


@pytest.fixture
def tiny_qrels():
    return Qrels({("q1", "d1"): 1, ("q1", "d3"): 0})


@pytest.fixture
def green_query():
    return Query("q1", "green tea benefits")


def make_separable(n_queries=160, seed=0):
    """Positives repeat the query's own words; negatives share none of them."""
    import random

    from mcqrerank.corpus import QuerySet, TrainingPair
    from mcqrerank.retriever import build_index

    rng = random.Random(seed)
    filler = "lorem ipsum dolor sit amet consectetur adipiscing elit sed do".split()
    docs, queries, pairs = [], [], []
    for i in range(n_queries):
        words = [f"w{i}x{j}" for j in range(3)]
        queries.append(Query(f"q{i}", " ".join(words)))
        docs.append(Document(f"p{i}", " ".join(words + rng.sample(filler, 3))))
        docs.append(Document(f"n{i}", " ".join(rng.sample(filler, 6))))
        pairs += [TrainingPair(f"q{i}", f"p{i}", 1), TrainingPair(f"q{i}", f"n{i}", 0)]
    rng.shuffle(pairs)
    coll = Collection(docs)
    return QuerySet(queries), coll, build_index(coll), pairs


@pytest.fixture
def separable():
    return make_separable()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
