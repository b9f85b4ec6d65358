"""Which text each node kind is embedded from."""

from __future__ import annotations

import numpy as np

from ..backends import EmbeddingBackend
from ..errors import MissingContextualization, MissingDescription
from ..model import Node, NodeKind

_FROM_SUMMARY = frozenset({NodeKind.HEADER, NodeKind.TABLE, NodeKind.PAGE, NodeKind.DOCUMENT})


def embedding_source(node: Node) -> str:
    """Text chunk as is, image description, question for QA, summary for everything else.

    Tables and headers are never embedded from their raw body: pipe rows and
    long section text make weak vectors, the summary reads better.
    """
    if node.kind in (NodeKind.TEXT, NodeKind.QA):
        return node.content
    if node.kind == NodeKind.IMAGE:
        if not node.content.strip():
            raise MissingDescription(f"image node {node.node_id} has no description")
        return node.content
    if node.kind in _FROM_SUMMARY:
        if not node.summary or not node.summary.strip():
            raise MissingContextualization(f"{node.kind.value} node {node.node_id} has no summary")
        return node.summary
    raise ValueError(f"no embedding rule for {node.kind!r}")


def embed(text: str, backend: EmbeddingBackend) -> np.ndarray:
    return embed_many([text], backend)[0]


def embed_many(texts: list[str], backend: EmbeddingBackend, batch_size: int = 64) -> list[np.ndarray]:
    for t in texts:
        if not t:
            raise ValueError("cannot embed an empty text")
    out: list[np.ndarray] = []
    for i in range(0, len(texts), batch_size):
        batch = texts[i:i + batch_size]
        out.extend(backend.embed(batch))
    return [np.asarray(v, dtype=np.float64) for v in out]
