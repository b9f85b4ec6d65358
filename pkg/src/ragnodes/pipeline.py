"""End-to-end ingestion: parse, assemble, build the graph, index; plus knowledge-base loading."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .assembler import (DocumentMarkdown, PageMarkdown, assemble_page, concatenate_document,
                        extract_metadata, write_artifacts)
from .config import Backends, PipelineConfig, build_backends
from .index import InMemoryVectorStore, index_graph
from .model import SUPPORTED_FORMATS, DocumentMetadata, NodeGraph, NodeKind
from .nodegraph import apply_chunking, build_hierarchy, contextualize, split_markdown
from .parsing import load_source, parse_document

log = logging.getLogger(__name__)

COUNT_KINDS = ("Header", "Text", "Table", "Image", "Page", "Document")


@dataclass
class IngestResult:
    doc_id: str
    path: Path
    graph: NodeGraph
    graph_path: Path
    records: int
    warnings: list[str] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        counts = self.graph.kind_counts()
        return {k: counts.get(k, 0) for k in COUNT_KINDS}


def build_document_graph(path: Path | str, cfg: PipelineConfig, backends: Backends,
                         write_to: Path | None = None) -> tuple[NodeGraph, list[str]]:
    """Parse one file into a validated node graph; optionally writes the markdown artifacts."""
    source = load_source(path)
    bundles = parse_document(source, backends.parse_config(cfg))
    warnings = [f"{source.origin_path.name} page {b.page_index}: {e}" for b in bundles for e in b.errors]

    def assemble(bundle):
        return assemble_page(bundle, backends.agent)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            pages = list(pool.map(assemble, bundles))
    else:
        pages = [assemble(b) for b in bundles]
    graph, metadata, doc_md, empty = graph_from_pages(source.doc_id, pages, cfg, backends,
                                                      source.native_metadata)
    if empty:
        warnings.append(f"{source.origin_path.name}: no text content; metadata left empty")
    if write_to is not None:
        write_artifacts(write_to, source.doc_id, bundles, pages, doc_md, metadata)
    return graph, warnings


def graph_from_pages(doc_id: str, pages: Sequence[PageMarkdown], cfg: PipelineConfig, backends: Backends,
                     native: dict[str, str] | None = None
                     ) -> tuple[NodeGraph, DocumentMetadata, DocumentMarkdown, bool]:
    """Markdown pages to a validated graph: metadata, split, chunk, contextualize, hierarchy.

    The last element is True when the document had no text and metadata was left empty.
    """
    native = dict(native or {})
    doc_md = concatenate_document(pages)
    empty = not doc_md.markdown.strip()
    if empty:
        metadata = DocumentMetadata(native=native)
    else:
        metadata = extract_metadata(doc_md, native, backends.agent)
    fragments = []
    for page in pages:
        fragment = split_markdown(page, doc_id)
        apply_chunking(fragment, cfg.split, backends.embedding)
        contextualize(fragment, backends.agent, cfg.questions_per_node, jobs=cfg.jobs)
        fragments.append(fragment)
    graph = build_hierarchy(doc_id, fragments, pages, doc_md, metadata, backends.agent)
    return graph, metadata, doc_md, empty


def ingest_document(path: Path | str, cfg: PipelineConfig, backends: Backends,
                    store: InMemoryVectorStore) -> IngestResult:
    out = Path(cfg.out_dir)
    graph, warnings = build_document_graph(path, cfg, backends, write_to=out)
    doc_id = graph.root.split("/", 1)[0]
    store.delete_document(doc_id, cfg.namespace)
    records = index_graph(graph, store, backends.embedding, cfg.namespace)
    graph_path = graph.save(out / f"{doc_id}.graph.json")
    return IngestResult(doc_id, Path(path), graph, graph_path, records, warnings)


def collect_inputs(paths: Iterable[Path | str]) -> list[Path]:
    """Expand directories to their supported files (sorted); explicit files pass through as given."""
    out: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(f for f in p.rglob("*")
                              if f.is_file() and f.suffix.lower().lstrip(".") in SUPPORTED_FORMATS))
        else:
            out.append(p)
    return out


def open_store(cfg: PipelineConfig) -> InMemoryVectorStore:
    """The knowledge-base index for cfg.namespace, loaded from disk when present."""
    store = InMemoryVectorStore(metadata_limit_bytes=cfg.metadata_limit_bytes)
    path = store.index_path(cfg.out_dir, cfg.namespace)
    if path.exists():
        store.load(path)
    return store


def load_graphs(out_dir: Path | str) -> dict[str, NodeGraph]:
    graphs = {}
    for p in sorted(Path(out_dir).glob("*.graph.json")):
        g = NodeGraph.load(p)
        graphs[p.name[: -len(".graph.json")]] = g
    return graphs


def node_text(graphs: dict[str, NodeGraph], node_id: str) -> str:
    """Content handed to the answer model for a retrieved node."""
    graph = graphs.get(node_id.split("/", 1)[0])
    if graph is None or node_id not in graph:
        raise KeyError(node_id)
    node = graph.node(node_id)
    if node.kind == NodeKind.QA:
        return f"{node.content}\n{node.answer or ''}".strip()
    return node.content


__all__ = ["IngestResult", "build_backends", "build_document_graph",
           "collect_inputs", "graph_from_pages", "ingest_document", "load_graphs", "node_text", "open_store"]
