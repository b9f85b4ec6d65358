"""Page and Document nodes on top of the per-page fragments."""

from __future__ import annotations

from typing import Sequence

from ..assembler import DocumentMarkdown, PageMarkdown
from ..backends import Agent
from ..errors import GraphInvariantViolation, UnknownNode
from ..model import (DocumentMetadata, Node, NodeGraph, NodeKind, RelKind, Violation, link,
                     new_node_id, validate_graph)
from .context import summarize
from .split import top_level


def page_node_id(doc_id: str, page_index: int) -> str:
    return new_node_id(doc_id, NodeKind.PAGE, page_index)


def document_node_id(doc_id: str) -> str:
    return new_node_id(doc_id, NodeKind.DOCUMENT, 0)


def build_hierarchy(doc_id: str, fragments: Sequence[NodeGraph], page_mds: Sequence[PageMarkdown],
                    doc_md: DocumentMarkdown, metadata: DocumentMetadata | None = None,
                    agent: Agent | None = None) -> NodeGraph:
    """Merge page fragments under Page nodes and a single Document root.

    With an agent, Page nodes get summaries and the Document node gets one
    unless the metadata already carries it. The result must validate cleanly.
    """
    if len(fragments) != len(page_mds):
        raise ValueError(f"{len(fragments)} fragments for {len(page_mds)} pages")
    doc_summary = metadata.summary if metadata and metadata.summary else None
    root = document_node_id(doc_id)
    graph = NodeGraph(root=root)
    graph.add_node(Node(root, NodeKind.DOCUMENT, doc_md.markdown, summary=doc_summary))
    prev_page = None
    for fragment, page in zip(fragments, sorted(page_mds, key=lambda p: p.page_index)):
        pid = page_node_id(doc_id, page.page_index)
        graph.add_node(Node(pid, NodeKind.PAGE, page.markdown, page_index=page.page_index))
        for node in fragment.nodes.values():
            if node.node_id in graph:
                raise GraphInvariantViolation([Violation("DuplicateNode", node.node_id)])
            graph.add_node(node)
        for edge in fragment.edges:
            graph.add_edge(edge)
        link(graph, root, pid, RelKind.CHILD)
        if prev_page is not None:
            link(graph, prev_page, pid, RelKind.NEXT)
        prev_page = pid
        for nid in top_level(fragment):
            link(graph, pid, nid, RelKind.CHILD)

    if agent is not None:
        for node in graph.of_kind(NodeKind.PAGE):
            graph.update_node(node.node_id, summary=summarize(node, agent, graph))
        document = graph.node(root)
        if not document.summary:
            graph.update_node(root, summary=summarize(document, agent, graph))

    violations = validate_graph(graph)
    if violations:
        raise GraphInvariantViolation(violations)
    return graph


def attach_qa(graph: NodeGraph, doc_node_id: str, node: Node) -> Node:
    """Add a QA node as a child of its Document node."""
    if doc_node_id not in graph or graph.node(doc_node_id).kind != NodeKind.DOCUMENT:
        raise UnknownNode(doc_node_id)
    graph.add_node(node)
    link(graph, doc_node_id, node.node_id, RelKind.CHILD)
    return node
