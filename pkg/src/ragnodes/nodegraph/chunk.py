"""Chunking of oversized Text nodes (recursive or semantic splitter)."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..backends import EmbeddingBackend
from ..errors import WrongNodeKind
from ..model import Node, NodeGraph, NodeKind, Relationship, RelKind, new_node_id
from ..textutil import sentence_spans

log = logging.getLogger(__name__)

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class SplitConfig:
    text_threshold_chars: int = 1500
    chunk_overlap_chars: int = 150
    splitter: str = "recursive"
    semantic_breakpoint_percentile: float = 90.0

    def __post_init__(self):
        if self.text_threshold_chars <= 0:
            raise ValueError("text_threshold_chars must be > 0")
        if not 0 <= self.chunk_overlap_chars < self.text_threshold_chars:
            raise ValueError("chunk_overlap_chars must be in [0, text_threshold_chars)")
        if self.splitter not in ("recursive", "semantic"):
            raise ValueError(f"unknown splitter {self.splitter!r}")
        if not 0 < self.semantic_breakpoint_percentile < 100:
            raise ValueError("semantic_breakpoint_percentile must be in (0, 100)")


def _cut_points(text: str, start: int, end: int, level: int) -> list[int]:
    """Offsets just after each separator of the given level inside ``text[start:end]``."""
    if level == 0:
        pattern = re.compile(r"\n\n+")
    elif level == 1:
        pattern = re.compile(r"\n")
    elif level == 2:
        pattern = _SENTENCE_BREAK
    else:
        pattern = re.compile(r"\s+")
    return [m.end() for m in pattern.finditer(text, start, end) if start < m.end() < end]


def _pieces(text: str, start: int, end: int, limit: int, level: int = 0) -> list[tuple[int, int]]:
    """Tile ``[start, end)`` with pieces of at most ``limit`` chars, cutting at the
    coarsest separator available: blank line, line break, sentence end, word
    boundary, then a hard cut."""
    if end - start <= limit:
        return [(start, end)]
    if level == 4:
        return [(a, min(a + limit, end)) for a in range(start, end, limit)]
    cuts = _cut_points(text, start, end, level)
    if not cuts:
        return _pieces(text, start, end, limit, level + 1)
    out = []
    for a, b in zip([start] + cuts, cuts + [end]):
        out.extend(_pieces(text, a, b, limit, level + 1))
    return out


def recursive_spans(text: str, threshold: int, overlap: int) -> list[tuple[int, int]]:
    """Spans of chunks no longer than ``threshold``; consecutive spans overlap by 1..overlap chars."""
    n = len(text)
    if n <= threshold:
        return [(0, n)]
    pieces = _pieces(text, 0, n, threshold - overlap)
    spans: list[tuple[int, int]] = []
    start, i = 0, 0
    while True:
        end = start
        while i < len(pieces) and pieces[i][1] - start <= threshold:
            end = pieces[i][1]
            i += 1
        spans.append((start, end))
        if i == len(pieces):
            return spans
        if overlap == 0:
            start = end
            continue
        lo = max(end - overlap, start + 1)
        boundaries = [p[0] for p in pieces[:i] if lo <= p[0] < end]
        if boundaries:
            start = min(boundaries)
        else:
            word = next((j for j in range(lo, end) if text[j - 1].isspace() and not text[j].isspace()), None)
            start = word if word is not None else lo


def _cosine_distances(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = []
    for a, b in zip(vectors, vectors[1:]):
        denom = float(np.linalg.norm(a) * np.linalg.norm(b)) or 1.0
        out.append(1.0 - float(np.dot(a, b)) / denom)
    return np.asarray(out)


def semantic_spans(text: str, cfg: SplitConfig, embedder: EmbeddingBackend) -> list[tuple[int, int]]:
    """Break between sentences whose embedding distance exceeds the configured percentile;
    groups still over the threshold are split recursively."""
    sents = sentence_spans(text)
    if len(sents) < 2:
        return recursive_spans(text, cfg.text_threshold_chars, cfg.chunk_overlap_chars)
    vectors = embedder.embed([text[a:b].strip() or text[a:b] for a, b in sents])
    dists = _cosine_distances(vectors)
    cutoff = float(np.percentile(dists, cfg.semantic_breakpoint_percentile))
    groups, start = [], sents[0][0]
    for k, dist in enumerate(dists):
        if dist > cutoff:
            groups.append((start, sents[k][1]))
            start = sents[k + 1][0]
    groups.append((start, sents[-1][1]))
    spans = []
    for a, b in groups:
        for sa, sb in recursive_spans(text[a:b], cfg.text_threshold_chars, cfg.chunk_overlap_chars):
            spans.append((a + sa, a + sb))
    return spans


def reassemble(pieces: Sequence[str], spans: Sequence[tuple[int, int]]) -> str:
    """Join chunks, dropping each chunk's overlap with its predecessor."""
    out, pos = [], 0
    for piece, (a, b) in zip(pieces, spans):
        out.append(piece[max(pos - a, 0):])
        pos = b
    return "".join(out)


def chunk_text(node: Node, cfg: SplitConfig | None = None,
               embed_backend: EmbeddingBackend | None = None) -> list[Node]:
    cfg = cfg or SplitConfig()
    if node.kind != NodeKind.TEXT:
        raise WrongNodeKind(f"chunk_text needs a Text node, got {node.kind.value}")
    text = node.content
    if len(text) <= cfg.text_threshold_chars:
        return [node]
    if cfg.splitter == "semantic" and embed_backend is None:
        log.warning("semantic splitter requested without an embedding backend; using recursive")
    if cfg.splitter == "semantic" and embed_backend is not None:
        spans = semantic_spans(text, cfg, embed_backend)
    else:
        spans = recursive_spans(text, cfg.text_threshold_chars, cfg.chunk_overlap_chars)
    base = node.char_span[0] if node.char_span else None
    return [Node(new_node_id(node.node_id, NodeKind.TEXT, k), NodeKind.TEXT, text[a:b],
                 page_index=node.page_index,
                 char_span=(base + a, base + b) if base is not None else None)
            for k, (a, b) in enumerate(spans)]


def replace_with_chunks(graph: NodeGraph, old_id: str, chunks: list[Node]) -> None:
    """Swap a node for its chunks: chunks take its parent and its place in the sibling chain."""
    if len(chunks) == 1 and chunks[0].node_id == old_id:
        return
    graph.node(old_id)
    ids = [c.node_id for c in chunks]
    first, last = ids[0], ids[-1]
    chain = []
    for a, b in zip(ids, ids[1:]):
        chain += [Relationship(a, b, RelKind.NEXT), Relationship(b, a, RelKind.PREVIOUS)]
    edges: list[Relationship] = []
    for e in graph.edges:
        if e.dst == old_id and e.kind == RelKind.CHILD:
            for c in ids:
                edges += [Relationship(e.src, c, RelKind.CHILD), Relationship(c, e.src, RelKind.PARENT)]
            edges += chain
            chain = []
        elif e.src == old_id and e.kind == RelKind.PARENT:
            continue
        elif e.dst == old_id:
            edges.append(Relationship(e.src, first if e.kind == RelKind.NEXT else last, e.kind))
        elif e.src == old_id:
            src = last if e.kind == RelKind.NEXT else first
            edges.append(Relationship(src, e.dst, e.kind))
        else:
            edges.append(e)
    edges += chain
    nodes = {}
    for nid, n in graph.nodes.items():
        if nid == old_id:
            nodes.update((c.node_id, c) for c in chunks)
        else:
            nodes[nid] = n
    graph.nodes = nodes
    graph.set_edges(edges)


def apply_chunking(graph: NodeGraph, cfg: SplitConfig | None = None,
                   embed_backend: EmbeddingBackend | None = None) -> NodeGraph:
    cfg = cfg or SplitConfig()
    for node in list(graph.nodes.values()):
        if node.kind == NodeKind.TEXT and len(node.content) > cfg.text_threshold_chars:
            replace_with_chunks(graph, node.node_id, chunk_text(node, cfg, embed_backend))
    return graph
