"""Typed node graph construction: splitting, chunking, contextualization and hierarchy."""

from __future__ import annotations

from .chunk import SplitConfig, apply_chunking, chunk_text, reassemble, recursive_spans
from .context import Contextualization, contextualize, generate_questions, section_text, summarize
from .hierarchy import attach_qa, build_hierarchy, document_node_id, page_node_id
from .split import split_markdown, top_level, uncovered

__all__ = [
    "Contextualization", "SplitConfig", "apply_chunking", "attach_qa", "build_hierarchy",
    "chunk_text", "contextualize", "document_node_id", "generate_questions", "page_node_id",
    "reassemble", "recursive_spans", "section_text", "split_markdown", "summarize",
    "top_level", "uncovered",
]
