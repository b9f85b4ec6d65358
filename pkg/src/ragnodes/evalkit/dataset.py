"""Per-page evaluation datasets: one generated item for every Page node."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Sequence

from ..assembler import complete_with_repair
from ..backends import Agent, AgentRequest
from ..model import NodeGraph, NodeKind
from .metrics import EvalItem

_JSON_FENCE = re.compile(r"^```(?:json)?\s*\n(.*)\n```\s*$", re.DOTALL)


def _parse_item(reply: str) -> tuple[str, str, str]:
    text = reply.strip()
    m = _JSON_FENCE.match(text)
    if m:
        text = m.group(1)
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("dataset reply is not a JSON object")
    fields = tuple(data[k] for k in ("query", "expected_answer", "ground_truth"))
    if not all(isinstance(f, str) and f.strip() for f in fields):
        raise ValueError("query, expected_answer and ground_truth must be non-empty strings")
    return tuple(f.strip() for f in fields)


def generate_eval_dataset(doc_graph: NodeGraph, agent: Agent) -> list[EvalItem]:
    """One (query, expected answer, ground truth) item per page, in page order."""
    pages = sorted(doc_graph.of_kind(NodeKind.PAGE), key=lambda n: n.page_index or 0)
    if not pages:
        raise ValueError("graph has no Page nodes")
    doc_id = doc_graph.root.split("/", 1)[0] if doc_graph.root else pages[0].node_id.split("/", 1)[0]
    items = []
    for page in pages:
        request = AgentRequest("dataset", "dataset", {
            "doc_id": doc_id, "page_index": page.page_index, "markdown": page.content})
        query, expected, truth = complete_with_repair(agent, request, _parse_item,
                                                      f"dataset {page.node_id}")
        items.append(EvalItem(query, expected_answer=expected, ground_truth=truth,
                              doc_id=doc_id, page_index=page.page_index))
    return items


def generate_for_graphs(graphs: Iterable[NodeGraph], agent: Agent) -> list[EvalItem]:
    out: list[EvalItem] = []
    for graph in sorted(graphs, key=lambda g: g.root or ""):
        out.extend(generate_eval_dataset(graph, agent))
    return out


def save_dataset(items: Sequence[EvalItem], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    return path


def load_dataset(path: Path | str) -> list[EvalItem]:
    with Path(path).open(encoding="utf-8") as fh:
        return [EvalItem.from_dict(json.loads(line)) for line in fh if line.strip()]
