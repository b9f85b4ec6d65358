"""ragnodes command line: ingest, query, eval, inspect, export.

Exit codes: 0 success, 1 partial failure (some inputs failed, warnings printed),
2 hard failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from .config import PipelineConfig, build_backends, load_config
from .errors import EmptyIndex, RagNodesError
from .evalkit import RagPipeline, generate_for_graphs, load_dataset, run_evaluation, save_dataset
from .index import prefilter_documents, query
from .pipeline import COUNT_KINDS, collect_inputs, ingest_document, load_graphs, node_text, open_store

log = logging.getLogger("ragnodes")

EXIT_OK, EXIT_PARTIAL, EXIT_FAIL = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="TOML configuration file")
    g.add_argument("--namespace", help="knowledge-base namespace (default: from config)")
    g.add_argument("--k", type=int, help="number of nodes to retrieve (default 5)")
    g.add_argument("--jobs", type=int, help="worker cap for page-level parallelism")
    g.add_argument("--out", type=Path, help="output directory (default: out)")
    g.add_argument("--mock-all", action="store_true", help="use deterministic mocks for every backend")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragnodes", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse documents, build node graphs and index them")
    p.add_argument("paths", nargs="+", type=Path, help=".pdf/.docx/.pptx files or directories")
    _common(p)

    p = sub.add_parser("query", help="retrieve the top-k nodes for a question")
    p.add_argument("text")
    p.add_argument("--prefilter", action="store_true", help="restrict to the best-matching documents first")
    _common(p)

    p = sub.add_parser("eval", help="run the five metrics over a dataset")
    p.add_argument("dataset", nargs="?", type=Path, help="dataset JSONL (omit with --generate)")
    p.add_argument("--generate", action="store_true", help="build the per-page dataset from ingested graphs first")
    p.add_argument("--prefilter", action="store_true")
    _common(p)

    p = sub.add_parser("inspect", help="print a node and its relationships")
    p.add_argument("node_id")
    _common(p)

    p = sub.add_parser("export", help="copy a graph JSON or the index JSONL")
    p.add_argument("what", choices=("graph", "index"))
    p.add_argument("doc_id", nargs="?", help="document id (graph export)")
    p.add_argument("--dest", type=Path, help="destination file (default: stdout)")
    _common(p)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.mock_all:
        cfg = cfg.mock_all()
    return cfg.with_overrides(namespace=args.namespace, k=args.k, jobs=args.jobs, out_dir=args.out)


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    backends = build_backends(cfg)
    store = open_store(cfg)
    inputs = collect_inputs(args.paths)
    missing = [p for p in args.paths if not p.exists()]
    for p in missing:
        print(f"error: {p}: no such file or directory", file=sys.stderr)
    inputs = [p for p in inputs if p.exists()]
    ok, failed = 0, len(missing)
    totals = {k: 0 for k in COUNT_KINDS}
    for path in inputs:
        try:
            result = ingest_document(path, cfg, backends, store)
        except RagNodesError as exc:
            failed += 1
            print(f"error: {path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        ok += 1
        for w in result.warnings:
            print(f"warning: {w}", file=sys.stderr)
        counts = result.counts
        for k, v in counts.items():
            totals[k] += v
        print(f"{result.doc_id}: " + " ".join(f"{k}={v}" for k, v in counts.items()))
    if ok:
        path = store.save(cfg.out_dir, cfg.namespace)
        print(f"ingested {ok} document(s); index {path}")
        print("totals: " + " ".join(f"{k}={v}" for k, v in totals.items()))
    if failed:
        print(f"warning: {failed} input(s) failed", file=sys.stderr)
    if not ok:
        return EXIT_FAIL
    return EXIT_PARTIAL if failed else EXIT_OK


def _store_or_fail(cfg: PipelineConfig):
    store = open_store(cfg)
    if not store.stats(cfg.namespace)["count"]:
        raise EmptyIndex(f"no index for namespace {cfg.namespace!r} under {cfg.out_dir}; "
                         f"run `ragnodes ingest` first")
    return store


def cmd_query(args, cfg: PipelineConfig) -> int:
    store = _store_or_fail(cfg)
    backends = build_backends(cfg)
    docs = None
    if args.prefilter:
        docs = prefilter_documents(args.text, store, backends.embedding, cfg.prefilter_m, cfg.namespace)
        print(f"prefilter: {', '.join(docs)}")
    hits = query(args.text, cfg.k, store, backends.embedding, doc_filter=docs, namespace=cfg.namespace)
    for h in hits:
        page = h.metadata.get("page_index")
        where = h.metadata.get("doc_id", "") + (f" p{page}" if page is not None else "")
        print(f"{h.rank}. {h.score:.4f} {h.metadata.get('kind', '?'):<8} {h.node_id}  [{where}]")
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    store = _store_or_fail(cfg)
    backends = build_backends(cfg)
    graphs = load_graphs(cfg.out_dir)
    eval_dir = Path(cfg.out_dir) / "eval"
    if args.generate:
        dataset = generate_for_graphs(graphs.values(), backends.agent)
        path = save_dataset(dataset, eval_dir / "dataset.jsonl")
        print(f"dataset: {len(dataset)} item(s) -> {path}")
    elif args.dataset is not None:
        dataset = load_dataset(args.dataset)
    else:
        print("error: give a dataset path or --generate", file=sys.stderr)
        return EXIT_FAIL
    pipeline = RagPipeline(store, backends.embedding, backends.answer, cfg.namespace,
                           prefilter=args.prefilter, prefilter_m=cfg.prefilter_m,
                           content_of=lambda nid: node_text(graphs, nid))
    report = run_evaluation(dataset, pipeline, backends.judge, k=cfg.k, jobs=cfg.jobs)
    report_path, text_path = report.write(eval_dir)
    print(report.summary_table())
    print(f"report: {report_path}, {text_path}")
    return EXIT_OK


def cmd_inspect(args, cfg: PipelineConfig) -> int:
    graphs = load_graphs(cfg.out_dir)
    graph = graphs.get(args.node_id.split("/", 1)[0])
    if graph is None or args.node_id not in graph:
        print(f"error: unknown node {args.node_id!r}", file=sys.stderr)
        return EXIT_FAIL
    node = graph.node(args.node_id)
    edges = [e.to_dict() for e in graph.edges if e.src == node.node_id]
    print(json.dumps({"node": node.to_dict(), "relationships": edges}, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_export(args, cfg: PipelineConfig) -> int:
    out = Path(cfg.out_dir)
    if args.what == "graph":
        if not args.doc_id:
            print("error: export graph needs a doc_id", file=sys.stderr)
            return EXIT_FAIL
        src = out / f"{args.doc_id}.graph.json"
    else:
        src = out / f"{cfg.namespace}.index.jsonl"
    if not src.exists():
        print(f"error: {src} does not exist", file=sys.stderr)
        return EXIT_FAIL
    if args.dest:
        args.dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, args.dest)
        print(f"wrote {args.dest}")
    else:
        sys.stdout.write(src.read_text(encoding="utf-8"))
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "query": cmd_query, "eval": cmd_eval,
            "inspect": cmd_inspect, "export": cmd_export}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (RagNodesError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
