"""Acceptance gate. Each test prints one ``PASS``/``FAIL`` line; run with ``-s`` to see them."""

import filecmp
import math
import random
import time

import numpy as np
import pytest

from mcqrerank.cli import main
from mcqrerank.corpus import Collection, Document, Qrels, Query, Run, RunEntry, load_run, write_run
from mcqrerank.metrics import lcs_length, mrr_at_n, recall_at_k, rouge_l
from mcqrerank.pipeline import run_experiment
from mcqrerank.retriever import build_index, retrieve_topk
from mcqrerank.scorer import CROSS_ENCODER, DIM, MCQA, LinearScorer, RERANKERS
from mcqrerank.synthetic import make_benchmark
from mcqrerank.training import TrainConfig, batch_loss, bce_with_logits, gradient, train

from conftest import ACCEPTANCE_LINES, make_separable
from oracles import central_difference, lcs_brute, recall_brute, rouge_brute, rr_brute, topk_brute

WORDS = "alpha beta gamma delta eps zeta eta theta iota kappa lambda mu".split()


def report(name, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    line = f"{'PASS' if ok else 'FAIL'} [{name}] {detail} ({elapsed:.2f}s, budget {budget:.0f}s)"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    return ok


def test_metric_oracles():
    t0 = time.perf_counter()
    rng = random.Random(11)
    n, bad = 200, []
    for i in range(n):
        docs = [f"d{j}" for j in range(rng.randint(1, 15))]
        run = Run.from_scores("q", [(d, rng.random()) for d in rng.sample(docs, rng.randint(0, len(docs)))])
        relevant = set(rng.sample(docs, rng.randint(1, len(docs))))
        qrels = Qrels({("q", d): 1 for d in relevant})
        ranking = [e.doc_id for e in run]
        run = Run({"q": run})
        k = rng.randint(1, 12)
        if recall_at_k(run, qrels, k)[0] != recall_brute(ranking, relevant, k):
            bad.append(("recall", i))
        if mrr_at_n(run, qrels, k)[0] != rr_brute(ranking, relevant, k):
            bad.append(("mrr", i))
        a = rng.choices(WORDS[:5], k=rng.randint(0, 10))
        b = rng.choices(WORDS[:5], k=rng.randint(0, 10))
        if lcs_length(a, b) != lcs_brute(a, b):
            bad.append(("lcs", i))
        beta = rng.choice([0.5, 1.0, 1.2, 2.0])
        if abs(rouge_l(" ".join(a), " ".join(b), beta) - rouge_brute(" ".join(a), " ".join(b), beta)) > 1e-12:
            bad.append(("rouge", i))
    elapsed = time.perf_counter() - t0
    assert report("metric oracles", not bad, f"{n} instances x 4 metrics, mismatches={bad[:5]}", elapsed, 10)


def test_adapter_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(5)
    nrng = np.random.default_rng(5)
    docs = [Document(f"d{i:02d}", " ".join(rng.choices(WORDS, k=rng.randint(1, 12)))) for i in range(40)]
    # near-duplicate passages produce exact logit ties
    docs += [Document(f"t{i}", docs[i].text) for i in range(5)]
    coll = Collection(docs)
    idx = build_index(coll)
    n, mismatches = 1000, 0
    for i in range(n):
        scale = 10.0 ** nrng.uniform(-3, 3)
        sc = LinearScorer(nrng.normal(size=DIM) * scale, float(nrng.normal() * scale))
        if i % 10 == 0:
            sc = LinearScorer.zeros()
        q = Query("q", " ".join(rng.choices(WORDS, k=rng.randint(1, 5))))
        cands = rng.sample(list(coll.values()), rng.randint(1, 20))
        ce = [c.doc_id for c in RERANKERS[CROSS_ENCODER](sc, q, cands, idx)]
        mc = [c.doc_id for c in RERANKERS[MCQA](sc, q, cands, idx)]
        mismatches += ce != mc
    elapsed = time.perf_counter() - t0
    assert report("adapter equivalence", mismatches == 0, f"{n} instances, mismatches={mismatches}", elapsed, 10)


def test_gradient_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    n, worst = 150, 0.0
    for _ in range(n):
        size = int(rng.integers(1, 33))
        batch = [(rng.normal(size=DIM) * rng.uniform(0.1, 3), int(rng.integers(0, 2))) for _ in range(size)]
        sc = LinearScorer(rng.normal(size=DIM) * 0.5, float(rng.normal()))
        gw, gb = gradient(sc, batch)
        params = list(sc.w) + [sc.b]
        fd = central_difference(lambda p: batch_loss(LinearScorer(np.array(p[:-1]), p[-1]), batch), params)
        a, b = np.append(gw, gb), np.array(fd)
        worst = max(worst, np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))
    elapsed = time.perf_counter() - t0
    assert report("gradient check", worst < 1e-5, f"{n} batches, max relative error={worst:.2e}", elapsed, 10)


def test_bm25_oracle():
    t0 = time.perf_counter()
    rng = random.Random(21)
    n, bad = 150, 0
    for _ in range(n):
        docs = {f"d{j:02d}": " ".join(rng.choices(WORDS, k=rng.randint(0, 15)))
                for j in range(rng.randint(1, 50))}
        idx = build_index(Collection(Document(d, t) for d, t in docs.items()))
        for _ in range(3):
            query = " ".join(rng.choices(WORDS + ["unseen"], k=rng.randint(1, 6)))
            k = rng.randint(1, 60)
            got = [(e.doc_id, e.score) for e in retrieve_topk(idx, query, k)]
            bad += got != topk_brute(docs, query, k)
    elapsed = time.perf_counter() - t0
    assert report("BM25 oracle", bad == 0, f"{n} corpora x 3 queries, mismatches={bad}", elapsed, 10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synthetic_benchmark_beats_bm25(seed):
    t0 = time.perf_counter()
    bench = make_benchmark(seed=seed)
    res = run_experiment(bench, config=TrainConfig(learning_rate=0.02, seed=seed), iterations=10000, seed=seed)
    n_docs, n_test = len(bench.collection), len(res.bm25.per_query)
    base, ce = res.bm25, res.cross_encoder
    ok = (
        n_docs >= 200 and len(bench.queries) >= 50
        and ce.recall_at_1 > base.recall_at_1 and ce.mrr_at_10 > base.mrr_at_10
        and res.p_recall1 < 0.05 and res.p_mrr10 < 0.05
        and res.mcqa.recall_at_1 == ce.recall_at_1 and res.mcqa.mrr_at_10 == ce.mrr_at_10
    )
    elapsed = time.perf_counter() - t0
    detail = (f"{n_docs} docs, {len(bench.queries)} queries ({n_test} test); "
              f"R@1 {base.recall_at_1:.4f} -> {ce.recall_at_1:.4f} (p={res.p_recall1:.4f}), "
              f"MRR@10 {base.mrr_at_10:.4f} -> {ce.mrr_at_10:.4f} (p={res.p_mrr10:.4f})")
    assert report("synthetic benchmark", ok, detail, elapsed, 120)


def test_loss_behaviour():
    t0 = time.perf_counter()
    queries, coll, idx, pairs = make_separable()
    cfg = TrainConfig(epochs=7, patience=7)
    _, hist = train(LinearScorer.zeros(), pairs, None, cfg, queries, coll, idx)
    final = hist.records[-1].train_loss
    ratio = final / hist.initial_loss
    with np.errstate(over="raise", invalid="raise"):
        extremes = [bce_with_logits(s * 700.0, y) for s in (1, -1) for y in (0, 1)]
        g = gradient(LinearScorer.zeros(), [(np.full(DIM, 100.0), 1), (np.full(DIM, -100.0), 0)])
    finite = all(math.isfinite(v) for v in extremes) and np.all(np.isfinite(g[0]))
    ln2_err = abs(bce_with_logits(0.0, 1) - math.log(2))
    ok = len(hist.records) == 7 and ratio < 0.1 and ln2_err <= 1e-12 and finite
    elapsed = time.perf_counter() - t0
    detail = (f"loss {hist.initial_loss:.4f} -> {final:.4f} (ratio {ratio:.4f}) after {len(hist.records)} epochs; "
              f"|bce(0,1)-ln2|={ln2_err:.1e}; finite at |logit|=700: {finite}")
    assert report("loss behaviour", ok, detail, elapsed, 60)


def test_determinism(tmp_path):
    t0 = time.perf_counter()
    codes = [main(["demo", "--output-dir", str(tmp_path / name), "--seed", "7"]) for name in ("a", "b")]

    def differing(c):
        out = c.left_only + c.right_only + c.diff_files + c.funny_files
        for sub in c.subdirs.values():
            out += differing(sub)
        return out

    diffs = differing(filecmp.dircmp(tmp_path / "a", tmp_path / "b"))
    n_files = sum(1 for p in (tmp_path / "a").rglob("*") if p.is_file())

    # run files survive write -> load -> write unchanged
    round_trip_ok = True
    for path in sorted((tmp_path / "a" / "runs").glob("*.run")):
        run = load_run(path)
        tag = path.read_text().split("\n", 1)[0].split()[-1]
        again = tmp_path / f"{path.name}.again"
        write_run(run, tag, again)
        round_trip_ok &= again.read_bytes() == path.read_bytes()
        round_trip_ok &= load_run(again).doc_ids(next(iter(run))) == run.doc_ids(next(iter(run)))
    rng = random.Random(1)
    src = Run({f"q{i}": [RunEntry(f"q{i}", f"d{j}", j + 1, s) for j, s in
                         enumerate(sorted((rng.uniform(-50, 50) for _ in range(10)), reverse=True))]
               for i in range(20)})
    write_run(src, "rt", tmp_path / "src.run")
    back = load_run(tmp_path / "src.run")
    write_run(back, "rt", tmp_path / "back.run")
    round_trip_ok &= (tmp_path / "src.run").read_bytes() == (tmp_path / "back.run").read_bytes()
    round_trip_ok &= all(back.doc_ids(q) == src.doc_ids(q) for q in src)

    ok = codes == [0, 0] and not diffs and n_files > 0 and round_trip_ok
    elapsed = time.perf_counter() - t0
    detail = f"demo exit codes {codes}, {n_files} files, differing={diffs}, run round-trip exact: {round_trip_ok}"
    assert report("determinism", ok, detail, elapsed, 60)
