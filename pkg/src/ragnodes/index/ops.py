"""Indexing a node graph, retrieval, document pre-filtering and Q&A records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..backends import EmbeddingBackend, sha256_hex
from ..errors import EmptyIndex, UnknownDocument
from ..model import Node, NodeGraph, NodeKind, RelKind, link, new_node_id
from .sources import embed, embed_many, embedding_source
from .store import DEFAULT_NAMESPACE, EmbeddingRecord, InMemoryVectorStore, RetrievalHit

SUMMARY_EXCERPT_CHARS = 512


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    linked_doc: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("question must be non-empty")


def doc_id_of(node_id: str) -> str:
    return node_id.split("/", 1)[0]


def record_metadata(node: Node) -> dict:
    meta = {"doc_id": doc_id_of(node.node_id), "kind": node.kind.value}
    if node.page_index is not None:
        meta["page_index"] = node.page_index
    if node.summary:
        meta["summary"] = node.summary[:SUMMARY_EXCERPT_CHARS]
    return meta


def make_record(node: Node, vector, namespace: str = DEFAULT_NAMESPACE,
                extra: dict | None = None) -> EmbeddingRecord:
    meta = record_metadata(node)
    if extra:
        meta.update(extra)
    return EmbeddingRecord(node.node_id, vector, embedding_source(node), meta, namespace)


def index_graph(graph: NodeGraph, store: InMemoryVectorStore, backend: EmbeddingBackend,
                namespace: str = DEFAULT_NAMESPACE) -> int:
    """Embed and upsert every node of the graph; returns the record count."""
    nodes = sorted(graph.nodes.values(), key=lambda n: n.node_id)
    sources = [embedding_source(n) for n in nodes]
    vectors = embed_many(sources, backend)
    for node, vector in zip(nodes, vectors):
        extra = {"answer": node.answer[:SUMMARY_EXCERPT_CHARS]} if node.kind == NodeKind.QA and node.answer else None
        store.upsert(make_record(node, vector, namespace, extra))
    return len(nodes)


def query(query_text: str, k: int, store: InMemoryVectorStore, backend: EmbeddingBackend,
          doc_filter: Iterable[str] | None = None, namespace: str = DEFAULT_NAMESPACE) -> list[RetrievalHit]:
    """Top-k over every node kind; pass doc_filter to restrict candidates to some documents."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not store.stats(namespace)["count"]:
        raise EmptyIndex(f"namespace {namespace!r} has no records; run ingest first")
    return store.query(embed(query_text, backend), k, namespace, doc_filter=doc_filter)


def prefilter_documents(query_text: str, store: InMemoryVectorStore, backend: EmbeddingBackend,
                        m: int = 3, namespace: str = DEFAULT_NAMESPACE) -> list[str]:
    """Doc ids of the m Document nodes whose summaries best match the query."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not store.stats(namespace)["kinds"].get(NodeKind.DOCUMENT.value):
        raise EmptyIndex(f"namespace {namespace!r} has no Document records")
    hits = store.query(embed(query_text, backend), m, namespace, kinds=[NodeKind.DOCUMENT.value])
    return [h.metadata.get("doc_id", doc_id_of(h.node_id)) for h in hits]


def qa_node_id(pair: QAPair) -> str:
    # keyed by question text so re-indexing the same pair replaces it
    ordinal = int(sha256_hex(pair.question)[:12], 16)
    return new_node_id(pair.linked_doc, NodeKind.QA, ordinal)


def index_qa(pair: QAPair, store: InMemoryVectorStore, backend: EmbeddingBackend,
             graph: NodeGraph | None = None, namespace: str = DEFAULT_NAMESPACE,
             embed_answers: bool = False) -> Node:
    """Store a Q&A record embedded from its question; link it under its Document node."""
    if embed_answers:
        raise NotImplementedError("answer embeddings for Q&A records are not supported")
    doc_node = new_node_id(pair.linked_doc, NodeKind.DOCUMENT, 0)
    in_graph = graph is not None and doc_node in graph and graph.node(doc_node).kind == NodeKind.DOCUMENT
    if graph is not None and not in_graph:
        raise UnknownDocument(pair.linked_doc)
    if graph is None and pair.linked_doc not in store.stats(namespace)["documents"]:
        raise UnknownDocument(pair.linked_doc)
    node = Node(qa_node_id(pair), NodeKind.QA, pair.question, answer=pair.answer)
    if graph is not None:
        if node.node_id in graph:
            graph.nodes[node.node_id] = node
        else:
            graph.add_node(node)
            link(graph, doc_node, node.node_id, RelKind.CHILD)
    extra = dict(pair.metadata)
    extra["answer"] = pair.answer[:SUMMARY_EXCERPT_CHARS]
    store.upsert(make_record(node, embed(pair.question, backend), namespace, extra))
    return node
