"""Command-line harness: index, retrieve, train, rerank, eval, compare, demo.

Every option can also come from a flat ``key = value`` file passed with
``--config``; flags given on the command line take precedence.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import corpus, metrics, pipeline, retriever, synthetic, training
from .corpus import DataError
from .scorer import CROSS_ENCODER, MCQA, MODES, LinearScorer

logger = logging.getLogger("mcqrerank")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

DEMO_LEARNING_RATE = 0.02


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [])]
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _index_for(args) -> retriever.InvertedIndex:
    if getattr(args, "index", None):
        return retriever.load_index(args.index)
    return retriever.build_index(corpus.load_collection(args.collection), args.k1, args.b)


def cmd_index(args) -> int:
    _need(args, "collection", "output")
    idx = retriever.build_index(corpus.load_collection(args.collection), args.k1, args.b)
    retriever.save_index(idx, args.output)
    logger.info("indexed %d documents -> %s", idx.N, args.output)
    return EXIT_OK


def cmd_retrieve(args) -> int:
    _need(args, "queries", "output")
    if not (args.index or args.collection):
        raise UsageError("retrieve: give --index or --collection")
    idx = _index_for(args)
    run = pipeline.retrieve_run(idx, corpus.load_queries(args.queries), args.k)
    corpus.write_run(run, args.tag, args.output)
    return EXIT_OK


def _train_config(args) -> training.TrainConfig:
    return training.TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                                learning_rate=args.learning_rate, seed=args.seed,
                                patience=args.patience)


def cmd_train(args) -> int:
    _need(args, "collection", "queries", "qrels", "output_dir")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    coll = corpus.load_collection(args.collection)
    queries = corpus.load_queries(args.queries)
    qrels = corpus.load_qrels(args.qrels)
    idx = retriever.build_index(coll, args.k1, args.b)
    if args.train_pairs:
        data = corpus.load_training_pairs(args.train_pairs)
    else:
        data = pipeline.mine_training_set(idx, qrels, queries, args.negatives_per_query,
                                          args.seed, args.k)
        corpus.write_training_pairs(data, out / "training_pairs.jsonl")
    validation = None
    if args.val_qrels:
        vq = corpus.load_qrels(args.val_qrels)
        val_queries = corpus.QuerySet(queries[q] for q in vq.query_ids())
        validation = training.ValidationSet(val_queries, vq,
                                            pipeline.retrieve_run(idx, val_queries, args.k))
    initial = LinearScorer.load(args.init_model) if args.init_model else LinearScorer.zeros()
    scorer, history = training.train(initial, data, validation, _train_config(args),
                                     queries, coll, idx)
    scorer.save(out / "model.txt")
    history.to_csv(out / "history.csv")
    logger.info("best epoch %d of %d; model %s", history.best_epoch, len(history.records),
                scorer.fingerprint())
    return EXIT_OK


def cmd_rerank(args) -> int:
    _need(args, "run", "collection", "queries", "model", "output")
    coll = corpus.load_collection(args.collection)
    idx = retriever.load_index(args.index) if args.index else retriever.build_index(coll, args.k1, args.b)
    scorer = LinearScorer.load(args.model)
    first = corpus.load_run(args.run)
    queries = corpus.load_queries(args.queries)
    for qid in first:
        if qid not in queries:
            raise DataError(f"run references unknown query {qid!r}")
    new = pipeline.rerank_run(scorer, first, queries, coll, idx, args.mode)
    corpus.write_run(new, pipeline.run_tag(args.mode, scorer), args.output)
    return EXIT_OK


def describe_tag(tag: str | None) -> tuple[str, str]:
    """Model and Mode table columns from a run tag."""
    if tag is None:
        return "empty", ""
    if tag == pipeline.BM25_TAG:
        return "BM25", "Retriever only"
    for mode, label in ((CROSS_ENCODER, "Cross-encoder"), (MCQA, "MCQA")):
        if tag.startswith(mode + "-"):
            return f"linear-{tag[len(mode) + 1:]}", label
    return tag, ""


def _cutoffs(text: str) -> tuple[int, int, int]:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --cutoffs {text!r}") from None
    if len(vals) != 3 or min(vals) < 1:
        raise UsageError("--cutoffs needs three positive integers: recall_a,recall_b,mrr_n")
    return vals


def cmd_eval(args) -> int:
    _need(args, "run", "qrels", "output_dir")
    cutoffs = _cutoffs(args.cutoffs)
    qrels = corpus.load_qrels(args.qrels)
    coll = corpus.load_collection(args.collection) if args.collection else None
    refs = corpus.load_references(args.references) if args.references else None
    if refs and coll is None:
        raise UsageError("eval: --references needs --collection")
    qids = None
    if args.queries:
        qids = [q for q in corpus.load_queries(args.queries) if qrels.relevant(q)]
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for i, path in enumerate(args.run):
        model, mode = describe_tag(corpus.read_run_tag(path))
        rep = metrics.evaluate_run(corpus.load_run(path), qrels, model=model, mode=mode,
                                   collection=coll, references=refs, beta=args.beta,
                                   cutoffs=cutoffs, query_ids=qids)
        reports.append(rep)
        metrics.write_per_query_csv(rep, out / f"per_query.{i}.{Path(path).stem}.csv")
    table = metrics.format_table(reports)
    (out / "report.txt").write_text(table, encoding="utf-8")
    metrics.write_report_csv(reports, out / "report.csv")
    print(table, end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    _need(args, "a", "b")
    a = metrics.read_per_query_csv(args.a, args.metric)
    b = metrics.read_per_query_csv(args.b, args.metric)
    p = metrics.paired_permutation_test(a, b, args.iterations, args.seed)
    line = f"metric={args.metric} queries={len(a)} iterations={args.iterations} p={p:.6f}\n"
    if args.output:
        Path(args.output).write_text(line, encoding="utf-8")
    print(line, end="")
    return EXIT_OK


def cmd_demo(args) -> int:
    """Generate the synthetic benchmark and run every stage on it."""
    out = Path(args.output_dir)
    data = synthetic.write_benchmark(synthetic.make_benchmark(args.seed), out / "data")
    runs = out / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    lr = args.learning_rate if args.learning_rate_set else DEMO_LEARNING_RATE
    s = str(args.seed)
    steps = [
        ["index", "--collection", data["collection"], "--output", out / "index.json"],
        ["retrieve", "--index", out / "index.json", "--queries", data["queries"],
         "--k", str(args.k), "--output", runs / "bm25.run"],
        ["train", "--collection", data["collection"], "--queries", data["queries"],
         "--qrels", data["train_qrels"], "--val-qrels", data["val_qrels"],
         "--learning-rate", repr(lr), "--epochs", str(args.epochs),
         "--batch-size", str(args.batch_size), "--patience", str(args.patience),
         "--seed", s, "--output-dir", out / "model"],
    ]
    for mode in MODES:
        steps.append(["rerank", "--run", runs / "bm25.run", "--index", out / "index.json",
                      "--collection", data["collection"], "--queries", data["queries"],
                      "--model", out / "model" / "model.txt", "--mode", mode,
                      "--output", runs / f"{mode}.run"])
    steps.append(["eval", "--run", runs / "bm25.run", "--run", runs / "cross-encoder.run",
                  "--run", runs / "mcqa.run", "--qrels", data["test_qrels"],
                  "--queries", data["queries"], "--collection", data["collection"],
                  "--references", data["references"], "--output-dir", out / "eval"])
    for metric in ("recall@1", "rr@10"):
        steps.append(["compare", "--a", out / "eval" / "per_query.1.cross-encoder.csv",
                      "--b", out / "eval" / "per_query.0.bm25.csv", "--metric", metric,
                      "--seed", s, "--output", out / "eval" / f"compare.{metric}.txt"])
    for step in steps:
        code = main([str(x) for x in step])
        if code != EXIT_OK:
            return code
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcqrerank", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def bm25_opts(sp):
        sp.add_argument("--k1", type=float, default=retriever.DEFAULT_K1)
        sp.add_argument("--b", type=float, default=retriever.DEFAULT_B)

    def train_opts(sp):
        d = training.TrainConfig()
        sp.add_argument("--epochs", type=int, default=d.epochs)
        sp.add_argument("--batch-size", type=int, default=d.batch_size)
        sp.add_argument("--learning-rate", type=float, default=None)
        sp.add_argument("--patience", type=int, default=d.patience)
        sp.add_argument("--seed", type=int, default=d.seed)

    sp = sub.add_parser("index", help="build and serialise a BM25 index")
    sp.add_argument("--collection")
    sp.add_argument("--output")
    bm25_opts(sp)
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("retrieve", help="BM25 first-stage run")
    sp.add_argument("--index")
    sp.add_argument("--collection")
    sp.add_argument("--queries")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--tag", default=pipeline.BM25_TAG)
    sp.add_argument("--output")
    bm25_opts(sp)
    sp.set_defaults(func=cmd_retrieve)

    sp = sub.add_parser("train", help="fit the linear scorer")
    sp.add_argument("--collection")
    sp.add_argument("--queries")
    sp.add_argument("--qrels")
    sp.add_argument("--val-qrels")
    sp.add_argument("--train-pairs", help="JSONL pairs; mined from BM25 when omitted")
    sp.add_argument("--init-model")
    sp.add_argument("--negatives-per-query", type=int, default=3)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--output-dir")
    bm25_opts(sp)
    train_opts(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("rerank", help="rerank a first-stage run")
    sp.add_argument("--run")
    sp.add_argument("--index")
    sp.add_argument("--collection")
    sp.add_argument("--queries")
    sp.add_argument("--model")
    sp.add_argument("--mode", choices=MODES, default=CROSS_ENCODER)
    sp.add_argument("--output")
    bm25_opts(sp)
    sp.set_defaults(func=cmd_rerank)

    sp = sub.add_parser("eval", help="metric table for one or more runs")
    sp.add_argument("--run", action="append", default=None)
    sp.add_argument("--qrels")
    sp.add_argument("--queries", help="evaluate these queries; missing ones count as empty")
    sp.add_argument("--collection")
    sp.add_argument("--references")
    sp.add_argument("--beta", type=float, default=metrics.DEFAULT_BETA)
    sp.add_argument("--cutoffs", default="1,5,10")
    sp.add_argument("--output-dir")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("compare", help="paired permutation test on per-query CSVs")
    sp.add_argument("--a")
    sp.add_argument("--b")
    sp.add_argument("--metric", default="rr@10")
    sp.add_argument("--iterations", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("demo", help="full pipeline on a bundled synthetic benchmark")
    sp.add_argument("--output-dir", default="demo_out")
    sp.add_argument("--k", type=int, default=10)
    train_opts(sp)
    sp.set_defaults(func=cmd_demo)
    p.commands = sub.choices
    return p


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("no command given")
    if args.config:
        conf = read_config(args.config)
        sub = parser.commands[args.command]
        known = {a.dest: a for a in sub._actions}
        typed = {}
        for key, value in conf.items():
            if key not in known:
                raise UsageError(f"{args.config}: unknown key {key!r} for {args.command}")
            action = known[key]
            conv = action.type or str
            try:
                v = conv(value)
            except ValueError:
                raise UsageError(f"{args.config}: bad value for {key}: {value!r}") from None
            typed[key] = [v] if isinstance(action, argparse._AppendAction) else v
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    if hasattr(args, "learning_rate"):
        args.learning_rate_set = args.learning_rate is not None
        if args.learning_rate is None:
            args.learning_rate = training.TrainConfig().learning_rate
    return args


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _parse(argv)
    except OSError as exc:
        print(f"mcqrerank: usage error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"mcqrerank: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.verbose and not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mcqrerank {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"mcqrerank {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"mcqrerank {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
