"""Multimodal document ingestion into a typed node graph, vector retrieval and RAG evaluation."""

from __future__ import annotations

__version__ = "0.1.0"
