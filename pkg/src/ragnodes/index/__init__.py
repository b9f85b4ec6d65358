"""Embedding sources, the vector store and retrieval."""

from __future__ import annotations

from .ops import (QAPair, doc_id_of, index_graph, index_qa, make_record, prefilter_documents,
                  query, record_metadata)
from .sources import embed, embed_many, embedding_source
from .store import (DEFAULT_NAMESPACE, METADATA_LIMIT_BYTES, EmbeddingRecord, InMemoryVectorStore,
                    RetrievalHit, VectorStore, metadata_bytes)

__all__ = [
    "DEFAULT_NAMESPACE", "METADATA_LIMIT_BYTES", "EmbeddingRecord", "InMemoryVectorStore",
    "QAPair", "RetrievalHit", "VectorStore", "doc_id_of", "embed", "embed_many",
    "embedding_source", "index_graph", "index_qa", "make_record", "metadata_bytes",
    "prefilter_documents", "query", "record_metadata",
]
