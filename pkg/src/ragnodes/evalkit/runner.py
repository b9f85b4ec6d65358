"""Retrieve, answer and score an evaluation dataset end to end."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from ..assembler import complete_with_repair
from ..backends import Agent, AgentRequest, EmbeddingBackend
from ..index import DEFAULT_NAMESPACE, InMemoryVectorStore, RetrievalHit, prefilter_documents, query
from ..model import NodeKind
from .metrics import METRIC_FUNCTIONS, METRICS, EvalItem, MetricReport


def _non_empty(reply: str) -> str:
    text = reply.strip()
    if not text:
        raise ValueError("empty answer")
    return text


@dataclass
class RagPipeline:
    """Retrieval plus answer generation over an ingested index.

    ``content_of`` maps a hit's node id to the text handed to the answer model;
    by default it falls back to the record's embedded source text.
    """
    store: InMemoryVectorStore
    embedder: EmbeddingBackend
    answer_agent: Agent
    namespace: str = DEFAULT_NAMESPACE
    prefilter: bool = False
    prefilter_m: int = 3
    content_of: Callable[[str], str] | None = None

    def retrieve(self, text: str, k: int) -> list[RetrievalHit]:
        docs = None
        if self.prefilter:
            docs = prefilter_documents(text, self.store, self.embedder, self.prefilter_m, self.namespace)
        return query(text, k, self.store, self.embedder, doc_filter=docs, namespace=self.namespace)

    def context(self, hit: RetrievalHit) -> str:
        if self.content_of is not None:
            return self.content_of(hit.node_id)
        return self.store.get(hit.node_id, self.namespace).source_text

    def answer(self, text: str, contexts: Sequence[str]) -> str:
        request = AgentRequest("answer", "answer", {"query": text, "contexts": list(contexts)})
        return complete_with_repair(self.answer_agent, request, _non_empty, "answer")


@dataclass
class EvalReport:
    k: int
    items: list[EvalItem]
    metrics: dict[str, MetricReport]
    kind_histogram: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "item_count": len(self.items),
            "metrics": {name: self.metrics[name].to_dict() for name in METRICS if name in self.metrics},
            "kind_histogram": dict(sorted(self.kind_histogram.items())),
            "items": [{"query": it.query, "answer": it.answer, "context_ids": list(it.context_ids),
                       "doc_id": it.doc_id, "page_index": it.page_index} for it in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)

    def summary_table(self) -> str:
        lines = [f"{'metric':<22} {'mean':>8} {'items':>6}", "-" * 38]
        for name in METRICS:
            if name in self.metrics:
                rep = self.metrics[name]
                lines.append(f"{name:<22} {rep.mean:>8.4f} {rep.item_count:>6}")
        total = sum(self.kind_histogram.values())
        lines += ["", f"retrieved nodes by kind (k={self.k}, {total} hits)"]
        for kind, n in sorted(self.kind_histogram.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"  {kind:<10} {n:>5}  {n / total:6.1%}" if total else f"  {kind:<10} {n:>5}")
        return "\n".join(lines)

    def write(self, out_dir: Path | str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = out / "report.json"
        report.write_text(self.to_json() + "\n", encoding="utf-8")
        text = out / "report.txt"
        text.write_text(self.summary_table() + "\n", encoding="utf-8")
        return report, text


def run_evaluation(dataset: Sequence[EvalItem], pipeline: RagPipeline, judge: Agent, k: int = 5,
                   jobs: int = 1) -> EvalReport:
    """Retrieve top-k for every item (no kind filter), answer, and score all five metrics."""
    if not dataset:
        raise ValueError("evaluation dataset is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    filled, histogram = [], {kind.value: 0 for kind in NodeKind}
    for item in dataset:
        hits = pipeline.retrieve(item.query, k)
        contexts = [pipeline.context(h) for h in hits]
        for h in hits:
            kind = h.metadata.get("kind", "")
            histogram[kind] = histogram.get(kind, 0) + 1
        filled.append(replace(item, answer=pipeline.answer(item.query, contexts),
                              contexts=tuple(contexts), context_ids=tuple(h.node_id for h in hits)))
    metrics = {name: METRIC_FUNCTIONS[name](filled, judge, jobs=jobs) for name in METRICS}
    histogram = {kind: n for kind, n in histogram.items() if n}
    return EvalReport(k, filled, metrics, histogram)
