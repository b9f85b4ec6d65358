"""Question and summary generation for Header, Table, Page and Document nodes."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..assembler import complete_with_repair
from ..backends import Agent, AgentRequest
from ..errors import WrongNodeKind
from ..model import Node, NodeGraph, NodeKind

QUESTION_KINDS = frozenset({NodeKind.HEADER, NodeKind.TABLE})
SUMMARY_KINDS = frozenset({NodeKind.HEADER, NodeKind.TABLE, NodeKind.PAGE, NodeKind.DOCUMENT})

_BULLET = re.compile(r"^\s*(?:[-*+]|\d+[.)]|Q\d*[:.)])\s*")


@dataclass(frozen=True)
class Contextualization:
    node_id: str
    questions: tuple[str, ...]
    summary: str

    def __post_init__(self):
        if not self.questions:
            raise ValueError("contextualization needs at least one question")


def section_text(graph: NodeGraph, node_id: str) -> str:
    """Content of a node's descendants in document order, blank-line separated."""
    parts = []
    for child in graph.walk(node_id):
        if child.node_id != node_id and child.content:
            parts.append(child.content)
    return "\n\n".join(parts)


def breadcrumbs(graph: NodeGraph, node_id: str) -> list[str]:
    """Titles of enclosing headers, outermost first."""
    trail = []
    cur = graph.parent(node_id)
    while cur is not None:
        node = graph.node(cur)
        if node.kind == NodeKind.HEADER:
            trail.append(node.content)
        cur = graph.parent(cur)
    return trail[::-1]


def _parse_questions(reply: str) -> tuple[str, ...]:
    qs = []
    for line in reply.splitlines():
        q = _BULLET.sub("", line).strip()
        if q:
            qs.append(q)
    if not qs:
        raise ValueError("no questions in reply")
    return tuple(qs)


def _parse_summary(reply: str, kind: NodeKind | None = None) -> str:
    text = reply.strip()
    if not text:
        raise ValueError("empty summary")
    if kind == NodeKind.TABLE and "|" in text:
        # the table summary is what gets embedded; raw pipe rows embed poorly
        raise ValueError("table summary must describe the table, not reproduce its rows")
    return text


def _variables(graph: NodeGraph | None, node: Node) -> dict:
    if node.kind == NodeKind.HEADER:
        title, content = node.content, section_text(graph, node.node_id) if graph else ""
    elif node.kind == NodeKind.PAGE:
        title, content = str((node.page_index or 0) + 1), node.content
    else:
        title, content = "", node.content
    trail = breadcrumbs(graph, node.node_id) if graph and node.node_id in graph else []
    if node.kind == NodeKind.TABLE and trail:
        title = trail[-1]
    return {"kind": node.kind.value, "title": title, "context": " > ".join(trail), "content": content}


def generate_questions(node: Node, agent: Agent, count: int = 3,
                       graph: NodeGraph | None = None) -> list[str]:
    if node.kind not in QUESTION_KINDS:
        raise WrongNodeKind(f"questions are generated for Header/Table nodes, not {node.kind.value}")
    variables = dict(_variables(graph, node), count=count)
    request = AgentRequest("questions", "questions", variables)
    return list(complete_with_repair(agent, request, _parse_questions, f"questions {node.node_id}"))


def summarize(node: Node, agent: Agent, graph: NodeGraph | None = None) -> str:
    if node.kind not in SUMMARY_KINDS:
        raise WrongNodeKind(f"summaries are generated for Header/Table/Page/Document nodes, not {node.kind.value}")
    if node.kind == NodeKind.DOCUMENT and node.summary:
        return node.summary
    request = AgentRequest("summary", "summary", _variables(graph, node))
    return complete_with_repair(agent, request, lambda r: _parse_summary(r, node.kind),
                                f"summary {node.node_id}")


def contextualize_node(graph: NodeGraph, node_id: str, agent: Agent, count: int = 3) -> Contextualization:
    node = graph.node(node_id)
    questions = generate_questions(node, agent, count, graph)
    return Contextualization(node_id, tuple(questions), summarize(node, agent, graph))


def contextualize(graph: NodeGraph, agent: Agent, count: int = 3, jobs: int = 1) -> NodeGraph:
    """Attach questions and summaries to every Header and Table node, in place."""
    targets = [n.node_id for n in graph.nodes.values() if n.kind in QUESTION_KINDS]
    if jobs > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda nid: contextualize_node(graph, nid, agent, count), targets))
    else:
        results = [contextualize_node(graph, nid, agent, count) for nid in targets]
    for ctx in results:
        graph.update_node(ctx.node_id, questions=ctx.questions, summary=ctx.summary)
    return graph
