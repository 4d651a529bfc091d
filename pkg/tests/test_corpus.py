import json

import pytest
from hypothesis import given, settings, strategies as st

from mcqrerank.corpus import (
    DataError,
    Qrels,
    Run,
    RunEntry,
    TrainingPair,
    build_balanced_training_set,
    load_collection,
    load_qrels,
    load_queries,
    load_references,
    load_run,
    load_training_pairs,
    write_run,
    write_training_pairs,
)


class TestCollection:
    def test_empty_file(self, write):
        assert len(load_collection(write("c.tsv", ""))) == 0

    def test_two_lines(self, write):
        coll = load_collection(write("c.tsv", "d1\thello world\nd2\tgreen tea\n"))
        assert list(coll) == ["d1", "d2"]
        assert coll["d2"].text == "green tea"

    def test_blank_lines_are_skipped(self, write):
        coll = load_collection(write("c.tsv", "d1\ta\n\n   \nd2\tb\n"))
        assert len(coll) == 2

    def test_empty_text_column(self, write):
        assert load_collection(write("c.tsv", "d1\t\n"))["d1"].text == ""

    def test_text_may_contain_tabs_after_first(self, write):
        assert load_collection(write("c.tsv", "d1\ta\tb\n"))["d1"].text == "a\tb"

    def test_missing_tab_names_line(self, write):
        with pytest.raises(DataError, match=":1:"):
            load_collection(write("c.tsv", "d1hello\n"))

    def test_duplicate_id(self, write):
        with pytest.raises(DataError, match="d1"):
            load_collection(write("c.tsv", "d1\ta\nd1\tb\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_collection(tmp_path / "nope.tsv")


class TestQueries:
    def test_empty(self, write):
        assert len(load_queries(write("q.tsv", ""))) == 0

    def test_one(self, write):
        qs = load_queries(write("q.tsv", "q1\twhat is bm25\n"))
        assert list(qs) == ["q1"]
        assert qs["q1"].text == "what is bm25"

    def test_duplicate(self, write):
        with pytest.raises(DataError, match="duplicate"):
            load_queries(write("q.tsv", "q1\ta\nq1\tb\n"))


class TestQrels:
    def test_single_line(self, write):
        q = load_qrels(write("qrels", "q1 0 d1 1\n"))
        assert q[("q1", "d1")] == 1
        assert q.relevant("q1") == {"d1"}

    def test_empty(self, write):
        assert len(load_qrels(write("qrels", ""))) == 0

    def test_non_integer_grade(self, write):
        with pytest.raises(DataError, match=":1:"):
            load_qrels(write("qrels", "q1 0 d1 x\n"))

    def test_column_count(self, write):
        with pytest.raises(DataError, match="4 columns"):
            load_qrels(write("qrels", "q1 d1 1\n"))

    def test_duplicate_key(self, write):
        with pytest.raises(DataError, match="duplicate"):
            load_qrels(write("qrels", "q1 0 d1 1\nq1 0 d1 0\n"))

    def test_negative_grade(self, write):
        with pytest.raises(DataError):
            load_qrels(write("qrels", "q1 0 d1 -1\n"))

    def test_grade_zero_is_not_relevant(self):
        q = Qrels({("q1", "a"): 0, ("q1", "b"): 2})
        assert q.relevant("q1") == {"b"}
        assert q.positives() == [TrainingPair("q1", "b", 1)]


class TestRunFiles:
    def test_empty_round_trip(self, tmp_path):
        p = tmp_path / "r.run"
        write_run(Run(), "tag", p)
        assert p.read_text() == ""
        assert len(load_run(p)) == 0

    def test_line_format(self, tmp_path):
        p = tmp_path / "r.run"
        write_run(Run({"q1": [RunEntry("q1", "d2", 1, 1.5)]}), "tag", p)
        assert p.read_text() == "q1 Q0 d2 1 1.500000 tag\n"

    def test_rank_gap_rejected_on_load(self, write):
        p = write("r.run", "q1 Q0 a 1 2.0 t\nq1 Q0 b 3 1.0 t\n")
        with pytest.raises(DataError, match="rank"):
            load_run(p)

    def test_increasing_score_rejected(self, write):
        with pytest.raises(DataError, match="score"):
            load_run(write("r.run", "q1 Q0 a 1 1.0 t\nq1 Q0 b 2 2.0 t\n"))

    def test_duplicate_doc_rejected(self, write):
        with pytest.raises(DataError, match="twice"):
            load_run(write("r.run", "q1 Q0 a 1 2.0 t\nq1 Q0 a 2 1.0 t\n"))

    def test_wrong_columns(self, write):
        with pytest.raises(DataError, match="6 columns"):
            load_run(write("r.run", "q1 Q0 a 1 2.0\n"))

    def test_lines_may_arrive_out_of_rank_order(self, write):
        run = load_run(write("r.run", "q1 Q0 b 2 1.0 t\nq1 Q0 a 1 2.0 t\n"))
        assert run.doc_ids("q1") == ["a", "b"]

    def test_invalid_run_refused_on_write(self, tmp_path):
        bad = Run.__new__(Run)
        bad._by_query = {"q1": [RunEntry("q1", "a", 2, 1.0)]}
        with pytest.raises(DataError):
            write_run(bad, "t", tmp_path / "r.run")

    def test_invalid_tag(self, tmp_path):
        with pytest.raises(DataError):
            write_run(Run(), "has space", tmp_path / "r.run")

    def test_from_scores_tie_break(self):
        entries = Run.from_scores("q", [("b", 1.0), ("a", 1.0), ("c", 2.0)])
        assert [e.doc_id for e in entries] == ["c", "a", "b"]
        assert [e.rank for e in entries] == [1, 2, 3]


_ids = st.text(alphabet="abcdefghij0123456789-", min_size=1, max_size=6)


@st.composite
def runs(draw):
    by_q = {}
    for qid in draw(st.lists(_ids, unique=True, max_size=4)):
        docs = draw(st.lists(_ids, unique=True, max_size=6))
        scores = sorted(
            draw(st.lists(st.floats(-1e6, 1e6), min_size=len(docs), max_size=len(docs))),
            reverse=True,
        )
        by_q[qid] = [RunEntry(qid, d, i + 1, s) for i, (d, s) in enumerate(zip(docs, scores))]
    return Run(by_q)


@settings(max_examples=100, deadline=None)
@given(runs())
def test_run_round_trip(tmp_path_factory, run):
    p = tmp_path_factory.mktemp("rt") / "r.run"
    write_run(run, "sys", p)
    back = load_run(p)
    assert list(back) == [q for q in run if run[q]]
    for qid in back:
        orig, got = run[qid], back[qid]
        assert [(e.doc_id, e.rank) for e in got] == [(e.doc_id, e.rank) for e in orig]
        assert [e.score for e in got] == [float(f"{e.score:.6f}") for e in orig]


def test_training_pairs_jsonl(tmp_path):
    pairs = [TrainingPair("q1", "d1", 1), TrainingPair("q1", "d2", 0)]
    p = tmp_path / "pairs.jsonl"
    write_training_pairs(pairs, p)
    assert json.loads(p.read_text().splitlines()[0]) == {"query_id": "q1", "doc_id": "d1", "label": 1}
    assert load_training_pairs(p) == pairs


@pytest.mark.parametrize("line", ['{"query_id": "q", "doc_id": "d", "label": 2}',
                                  '{"query_id": "q", "label": 1}', "not json"])
def test_training_pairs_bad_lines(write, line):
    with pytest.raises(DataError):
        load_training_pairs(write("p.jsonl", line + "\n"))


def test_references(write):
    refs = load_references(write("refs.tsv", "q1\tthe answer\nq2\tother\n"))
    assert refs == {"q1": "the answer", "q2": "other"}
    with pytest.raises(DataError):
        load_references(write("dup.tsv", "q1\ta\nq1\tb\n"))


class TestBalancedTrainingSet:
    qrels = Qrels({("q1", "a"): 1, ("q2", "b"): 1, ("q2", "z"): 0})

    @staticmethod
    def negs(n):
        return [TrainingPair("q1", f"n{i}", 0) for i in range(n)]

    def test_exact_balance(self):
        out = build_balanced_training_set(self.qrels, self.negs(2), seed=0)
        assert len(out) == 4
        assert sorted(p.label for p in out) == [0, 0, 1, 1]

    def test_deterministic(self):
        a = build_balanced_training_set(self.qrels, self.negs(5), seed=7)
        b = build_balanced_training_set(self.qrels, self.negs(5), seed=7)
        assert a == b
        assert len(a) == 4

    def test_insufficient_negatives(self):
        qrels = Qrels({("q", "a"): 1, ("q", "b"): 1, ("q", "c"): 1})
        with pytest.raises(ValueError, match="3.*1|1.*3"):
            build_balanced_training_set(qrels, self.negs(1), seed=0)

    def test_rejects_positive_labels_in_negatives(self):
        with pytest.raises(ValueError):
            build_balanced_training_set(self.qrels, [TrainingPair("q1", "x", 1)] * 3, seed=0)

    def test_empty_qrels(self):
        with pytest.raises(ValueError):
            build_balanced_training_set(Qrels(), self.negs(3), seed=0)

    @given(st.integers(1, 20), st.integers(0, 30), st.integers(0, 2**32 - 1))
    def test_always_balanced(self, n_pos, extra, seed):
        qrels = Qrels({("q", f"p{i}"): 1 for i in range(n_pos)})
        out = build_balanced_training_set(qrels, self.negs(n_pos + extra), seed)
        labels = [p.label for p in out]
        assert labels.count(0) == labels.count(1) == n_pos
        assert len({(p.query_id, p.doc_id) for p in out}) == len(out)
