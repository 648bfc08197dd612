"""Command-line entry points for the search pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation, loadgen, training_data
from .httpapi import serve_forever
from .index import build_index, save_index
from .service import build_service, load_config
from .textproc import save_vocab, train_bpe


def _iter_corpus_texts(path: str):
    """Passage texts of a record corpus, or raw lines for plain text files."""
    first = ""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                first = line
                break
    is_records = False
    try:
        is_records = isinstance(json.loads(first), dict)
    except (json.JSONDecodeError, TypeError):
        pass
    if is_records:
        for doc in corpus_mod.load_corpus(path):
            for passage in corpus_mod.segment_passages(doc):
                yield passage.text
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield line.rstrip("\n")


def cmd_ingest(args: argparse.Namespace) -> int:
    reader = corpus_mod.load_corpus(args.corpus, strict=args.strict)
    out = open(args.out, "w", encoding="utf-8") if args.out else None
    try:
        def docs():
            for doc in reader:
                yield doc

        passages, stats = corpus_mod.segment_corpus(docs(), max_terms=args.max_terms)
        if out:
            for p in passages:
                out.write(
                    json.dumps(
                        {
                            "passage_id": p.passage_id,
                            "doc_id": p.doc_id,
                            "ordinal": p.ordinal,
                            "field": p.field.value,
                            "text": p.text,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    finally:
        if out:
            out.close()
    print(
        f"documents={stats.num_documents} passages={stats.num_passages} "
        f"avg_passage_length={stats.avg_passage_length:.2f} skipped={reader.skipped}"
    )
    return 0


def cmd_bpe_train(args: argparse.Namespace) -> int:
    vocab = train_bpe(_iter_corpus_texts(args.corpus), args.vocab_size)
    save_vocab(vocab, args.out)
    print(f"vocab_size={vocab.vocab_size} merges={len(vocab.merges)} -> {args.out}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    reader = corpus_mod.load_corpus(args.corpus, strict=args.strict)
    passages, stats = corpus_mod.segment_corpus(reader, max_terms=args.max_terms)
    index = build_index(passages, num_shards=args.shards)
    save_index(index, args.out)
    print(
        f"indexed passages={index.meta.N} shards={args.shards} "
        f"avgdl={index.meta.avgdl:.2f} -> {args.out}"
    )
    return 0


def cmd_gen_train(args: argparse.Namespace) -> int:
    triples = training_data.generate_training_data(
        queries_path=args.queries,
        collection_path=args.collection,
        qrels_path=args.qrels,
        lexicon_path=args.lexicon,
        out_path=args.out,
        negatives=args.negatives,
        seed=args.seed,
    )
    positives = sum(t.label for t in triples)
    print(f"triples={len(triples)} positives={positives} negatives={len(triples) - positives}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.saliency:
        config.saliency_path = args.saliency
    service = build_service(config)
    serve_forever(service, port=config.port)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    run = evaluation.read_run(args.run)
    qrels = evaluation.read_qrels(args.qrels)
    report = evaluation.evaluate(run, qrels, k_ndcg=args.k_ndcg, k_p=args.k_p)
    print(report.format())
    return 0


def cmd_loadtest(args: argparse.Namespace) -> int:
    queries = [q for q in Path(args.queries).read_text(encoding="utf-8").splitlines() if q.strip()]
    think_min, _, think_max = args.think.partition(":")
    config = loadgen.LoadConfig(
        url=args.url,
        queries=queries,
        num_users=args.users,
        think_range=(float(think_min), float(think_max or think_min)),
        duration=args.duration,
        warmup_qps=args.warmup_qps,
        warmup_duration=args.warmup_duration,
        time_scale=args.time_scale,
        seed=args.seed,
    )
    report = loadgen.run_load(config)
    if args.out:
        loadgen.write_report(report, args.out)
    print(report.to_tsv(), end="")
    print(f"failures={report.failures} samples={report.num_samples} valid={report.valid}")
    return 0 if report.valid else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vertsearch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="segment a corpus into passages")
    p.add_argument("--corpus", required=True)
    p.add_argument("--max-terms", type=int, default=corpus_mod.DEFAULT_MAX_TERMS)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bpe-train", help="train a subword vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, default=8000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bpe_train)

    p = sub.add_parser("index", help="build and save an inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--shards", type=int, default=30)
    p.add_argument("--max-terms", type=int, default=corpus_mod.DEFAULT_MAX_TERMS)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("gen-train", help="generate self-supervised training triples")
    p.add_argument("--queries", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--negatives", type=int, default=training_data.DEFAULT_TOP_N)
    p.add_argument("--seed", type=int, default=training_data.DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_train)

    p = sub.add_parser("serve", help="run the search HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--saliency", default="", help="saliency table enabling fusion mode")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k-ndcg", type=int, default=10)
    p.add_argument("--k-p", type=int, default=5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loadtest", help="run the load-testing protocol")
    p.add_argument("--url", required=True)
    p.add_argument("--users", type=int, default=50)
    p.add_argument("--think", default="15:60", help="uniform think range, seconds, min:max")
    p.add_argument("--duration", type=float, default=loadgen.DEFAULT_DURATION)
    p.add_argument("--warmup-qps", type=float, default=loadgen.DEFAULT_WARMUP_QPS)
    p.add_argument("--warmup-duration", type=float, default=loadgen.DEFAULT_WARMUP_DURATION)
    p.add_argument("--time-scale", type=float, default=1.0)
    p.add_argument("--queries", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_loadtest)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
