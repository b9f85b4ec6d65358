"""Document and node data model, relationship semantics and graph validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import IllegalChildOrigin, SelfLoop, UnknownNode

SUPPORTED_FORMATS = ("pdf", "docx", "pptx")


class NodeKind(str, Enum):
    HEADER = "Header"
    TEXT = "Text"
    TABLE = "Table"
    IMAGE = "Image"
    PAGE = "Page"
    DOCUMENT = "Document"
    QA = "QA"


# Kinds allowed to originate child edges. Page and Document are included because
# they contain the intra-page content nodes and the pages respectively.
CHILD_ORIGINS = frozenset({NodeKind.HEADER, NodeKind.PAGE, NodeKind.DOCUMENT})
CONTEXTUALIZED = frozenset({NodeKind.HEADER, NodeKind.TABLE, NodeKind.PAGE, NodeKind.DOCUMENT})


class RelKind(str, Enum):
    NEXT = "next"
    PREVIOUS = "previous"
    PARENT = "parent"
    CHILD = "child"

    @property
    def inverse(self) -> RelKind:
        return _INVERSE[self]


_INVERSE = {
    RelKind.NEXT: RelKind.PREVIOUS,
    RelKind.PREVIOUS: RelKind.NEXT,
    RelKind.PARENT: RelKind.CHILD,
    RelKind.CHILD: RelKind.PARENT,
}


@dataclass(frozen=True)
class DocumentSource:
    doc_id: str
    origin_path: Path
    format: str
    native_metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in SUPPORTED_FORMATS:
            raise ValueError(f"unsupported format {self.format!r}")


@dataclass(frozen=True)
class Node:
    node_id: str
    kind: NodeKind
    content: str
    summary: str | None = None
    questions: tuple[str, ...] | None = None
    level: int | None = None
    image_ref: str | None = None
    page_index: int | None = None
    char_span: tuple[int, int] | None = None
    # QA nodes only: content holds the question, answer the stored reply.
    answer: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        if self.questions is not None:
            d["questions"] = list(self.questions)
        if self.char_span is not None:
            d["char_span"] = list(self.char_span)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Node:
        d = dict(d)
        d["kind"] = NodeKind(d["kind"])
        if d.get("questions") is not None:
            d["questions"] = tuple(d["questions"])
        if d.get("char_span") is not None:
            d["char_span"] = tuple(d["char_span"])
        return cls(**d)


@dataclass(frozen=True)
class Relationship:
    src: str
    dst: str
    kind: RelKind

    def to_dict(self) -> dict:
        return {"from": self.src, "to": self.dst, "kind": self.kind.value}

    @property
    def inverse(self) -> Relationship:
        return Relationship(self.dst, self.src, self.kind.inverse)


@dataclass
class DocumentMetadata:
    topic: str = ""
    keywords: list[str] = field(default_factory=list)
    summary: str = ""
    native: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    def size_bytes(self) -> int:
        return len(json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False,
                              separators=(",", ":")).encode("utf-8"))


def new_node_id(doc_id: str, kind: NodeKind, ordinal: int) -> str:
    if ordinal < 0:
        raise ValueError("ordinal must be >= 0")
    return f"{doc_id}/{NodeKind(kind).value.lower()}/{ordinal}"


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.rule}({self.subject}){': ' + self.detail if self.detail else ''}"


class NodeGraph:
    """Typed nodes plus directed, inverse-paired relationship edges.

    ``root`` is the Document node id, or ``None`` for a per-page fragment that
    has not yet been attached to its Page and Document nodes.
    """

    def __init__(self, root: str | None = None):
        self.nodes: dict[str, Node] = {}
        self.edges: list[Relationship] = []
        self.root = root
        self._edge_set: set[Relationship] = set()

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, node: Node) -> Node:
        if node.node_id in self.nodes:
            raise ValueError(f"duplicate node id {node.node_id!r}")
        self.nodes[node.node_id] = node
        return node

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def update_node(self, node_id: str, **changes) -> Node:
        updated = replace(self.node(node_id), **changes)
        self.nodes[node_id] = updated
        return updated

    def add_edge(self, rel: Relationship) -> None:
        """Append a single directed edge without its inverse (used by loaders and tests)."""
        if rel not in self._edge_set:
            self._edge_set.add(rel)
            self.edges.append(rel)

    def has_edge(self, src: str, dst: str, kind: RelKind) -> bool:
        return Relationship(src, dst, RelKind(kind)) in self._edge_set

    def remove_node(self, node_id: str) -> None:
        self.node(node_id)
        del self.nodes[node_id]
        self.edges = [e for e in self.edges if e.src != node_id and e.dst != node_id]
        self._edge_set = set(self.edges)

    def set_edges(self, edges: Iterable[Relationship]) -> None:
        self.edges = []
        self._edge_set = set()
        for e in edges:
            self.add_edge(e)

    def targets(self, node_id: str, kind: RelKind) -> list[str]:
        return [e.dst for e in self.edges if e.src == node_id and e.kind == kind]

    def children(self, node_id: str) -> list[str]:
        return self.targets(node_id, RelKind.CHILD)

    def parent(self, node_id: str) -> str | None:
        parents = self.targets(node_id, RelKind.PARENT)
        return parents[0] if parents else None

    def next(self, node_id: str) -> str | None:
        nxt = self.targets(node_id, RelKind.NEXT)
        return nxt[0] if nxt else None

    def previous(self, node_id: str) -> str | None:
        prev = self.targets(node_id, RelKind.PREVIOUS)
        return prev[0] if prev else None

    def of_kind(self, kind: NodeKind) -> list[Node]:
        return [n for n in self.nodes.values() if n.kind == kind]

    def walk(self, start: str | None = None) -> Iterator[Node]:
        """Pre-order traversal along child edges."""
        start = start or self.root
        if start is None:
            return
        seen: set[str] = set()
        stack = [start]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            yield self.nodes[nid]
            stack.extend(reversed(self.children(nid)))

    def kind_counts(self) -> dict[str, int]:
        counts = {k.value: 0 for k in NodeKind}
        for n in self.nodes.values():
            counts[n.kind.value] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes.values()],
            "edges": [e.to_dict() for e in self.edges],
            "root": self.root,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> NodeGraph:
        g = cls(root=data.get("root"))
        for nd in data["nodes"]:
            g.add_node(Node.from_dict(nd))
        for ed in data["edges"]:
            g.add_edge(Relationship(ed["from"], ed["to"], RelKind(ed["kind"])))
        return g

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path | str) -> NodeGraph:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def link(graph: NodeGraph, a: str, b: str, kind: RelKind | str) -> NodeGraph:
    """Add the edge ``a -kind-> b`` and its inverse. Repeated calls are no-ops."""
    kind = RelKind(kind)
    for nid in (a, b):
        if nid not in graph.nodes:
            raise UnknownNode(nid)
    if a == b:
        raise SelfLoop(a)
    origin = a if kind == RelKind.CHILD else b if kind == RelKind.PARENT else None
    if origin is not None and graph.nodes[origin].kind not in CHILD_ORIGINS:
        raise IllegalChildOrigin(
            f"{graph.nodes[origin].kind.value} node {origin!r} cannot have children")
    rel = Relationship(a, b, kind)
    graph.add_edge(rel)
    graph.add_edge(rel.inverse)
    return graph


def _node_violations(node: Node) -> list[Violation]:
    out = []
    nid = node.node_id
    if (node.level is not None) != (node.kind == NodeKind.HEADER):
        out.append(Violation("LevelField", nid, "level present iff Header"))
    elif node.level is not None and node.level < 1:
        out.append(Violation("LevelField", nid, "level must be >= 1"))
    if (node.image_ref is not None) != (node.kind == NodeKind.IMAGE):
        out.append(Violation("ImageRefField", nid, "image_ref present iff Image"))
    if node.kind not in CONTEXTUALIZED and (node.summary is not None or node.questions is not None):
        out.append(Violation("ContextualizationField", nid,
                             f"{node.kind.value} nodes carry no questions/summary"))
    if not node.content and node.kind not in (NodeKind.PAGE, NodeKind.DOCUMENT):
        out.append(Violation("EmptyContent", nid))
    return out


def _find_cycles(graph: NodeGraph) -> list[list[str]]:
    """Iterative depth-first search for cycles along child edges."""
    adj: dict[str, list[str]] = {}
    for e in graph.edges:
        if e.kind == RelKind.CHILD and e.src in graph.nodes and e.dst in graph.nodes:
            adj.setdefault(e.src, []).append(e.dst)
    color: dict[str, int] = {}
    cycles: list[list[str]] = []
    seen_sets: set[frozenset[str]] = set()
    for start in graph.nodes:
        if color.get(start):
            continue
        path: list[str] = []
        stack = [(start, iter(adj.get(start, ())))]
        color[start] = 1
        path.append(start)
        while stack:
            nid, it = stack[-1]
            for nxt in it:
                state = color.get(nxt, 0)
                if state == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(adj.get(nxt, ()))))
                    break
                if state == 1:
                    cycle = path[path.index(nxt):]
                    key = frozenset(cycle)
                    if key not in seen_sets:
                        seen_sets.add(key)
                        cycles.append(cycle)
            else:
                color[nid] = 2
                path.pop()
                stack.pop()
    return cycles


def validate_graph(graph: NodeGraph) -> list[Violation]:
    violations: list[Violation] = []
    for node in graph.nodes.values():
        violations.extend(_node_violations(node))

    for e in graph.edges:
        label = f"{e.src}->{e.dst}:{e.kind.value}"
        missing = [nid for nid in (e.src, e.dst) if nid not in graph.nodes]
        if missing:
            violations.append(Violation("UnknownNode", label, ", ".join(missing)))
            continue
        if e.src == e.dst:
            violations.append(Violation("SelfLoop", label))
        if e.inverse not in graph._edge_set:
            violations.append(Violation("MissingInverse", label))
        if e.kind == RelKind.CHILD and graph.nodes[e.src].kind not in CHILD_ORIGINS:
            violations.append(Violation("IllegalChildOrigin", label))

    for cycle in _find_cycles(graph):
        violations.append(Violation("CycleDetected", " -> ".join(cycle)))

    if graph.root is None or graph.root not in graph.nodes:
        violations.append(Violation("MissingRoot", str(graph.root)))
        return violations
    if graph.nodes[graph.root].kind != NodeKind.DOCUMENT:
        violations.append(Violation("RootNotDocument", graph.root))
    reachable = {n.node_id for n in graph.walk()}
    for nid in graph.nodes:
        if nid not in reachable:
            violations.append(Violation("Unreachable", nid))
    return violations
