"""The five RAG metrics.

Each metric has a pure ``*_from_scores`` form over judge score matrices (item
by statement or context) and a judge-driven form over EvalItems that elicits
one score per (statement, reference) pair.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import kernels
from ..backends import Agent
from ..errors import EmptyContexts, MissingExpectedAnswer
from .judge import decompose_statements, score_pair

METRICS = ("answer_relevancy", "faithfulness", "contextual_relevancy",
           "contextual_precision", "contextual_recall")
RELEVANCE_THRESHOLD = 0.6


@dataclass(frozen=True)
class EvalItem:
    query: str
    answer: str = ""
    contexts: tuple[str, ...] = ()
    expected_answer: str = ""
    ground_truth: str = ""
    doc_id: str = ""
    page_index: int | None = None
    context_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"query": self.query, "answer": self.answer, "contexts": list(self.contexts),
                "expected_answer": self.expected_answer, "ground_truth": self.ground_truth,
                "doc_id": self.doc_id, "page_index": self.page_index,
                "context_ids": list(self.context_ids)}

    @classmethod
    def from_dict(cls, d: dict) -> EvalItem:
        return cls(d["query"], d.get("answer", ""), tuple(d.get("contexts", ())),
                   d.get("expected_answer", ""), d.get("ground_truth", ""), d.get("doc_id", ""),
                   d.get("page_index"), tuple(d.get("context_ids", ())))


@dataclass(frozen=True)
class MetricReport:
    metric: str
    per_item: tuple[float, ...]
    mean: float
    statement_counts: tuple[int, ...] = field(default=())

    @property
    def item_count(self) -> int:
        return len(self.per_item)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "mean": self.mean, "item_count": self.item_count,
                "per_item": list(self.per_item), "statement_counts": list(self.statement_counts)}


def _ragged(rows: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, row in enumerate(rows):
        offsets[i + 1] = offsets[i] + len(row)
    values = np.fromiter((float(x) for row in rows for x in row), dtype=np.float64, count=int(offsets[-1]))
    return values, offsets


def _check(rows: Sequence[Sequence[float]], metric: str) -> None:
    if not rows:
        raise ValueError(f"{metric}: needs at least one item")
    for row in rows:
        if not len(row):
            raise ValueError(f"{metric}: every item needs at least one score")
        for x in row:
            if not 0.0 <= float(x) <= 1.0:
                raise ValueError(f"{metric}: score {x!r} outside [0, 1]")


def mean_of_means(rows: Sequence[Sequence[float]], metric: str) -> MetricReport:
    _check(rows, metric)
    values, offsets = _ragged(rows)
    per, mean = kernels.mean_of_means(values, offsets)
    return MetricReport(metric, tuple(float(x) for x in per), float(mean), tuple(len(r) for r in rows))


def answer_relevancy_from_scores(scores: Sequence[Sequence[float]]) -> MetricReport:
    """Per item, the mean score of its answer statements against the query; then the mean over items."""
    return mean_of_means(scores, "answer_relevancy")


def faithfulness_from_scores(scores: Sequence[Sequence[float]]) -> MetricReport:
    """Per item, the mean support of its answer statements by the retrieved context."""
    return mean_of_means(scores, "faithfulness")


def contextual_relevancy_from_scores(scores: Sequence[Sequence[float]]) -> MetricReport:
    """Per item, the mean relevance of each retrieved context to the query."""
    return mean_of_means(scores, "contextual_relevancy")


def contextual_precision_from_relevance(relevance: Sequence[Sequence[float]]) -> MetricReport:
    """Per item (1/R(C)) * sum_k R(k)/k * r_k over contexts in rank order, R the running sum of r.

    An item with no relevant context scores 0.
    """
    _check(relevance, "contextual_precision")
    values, offsets = _ragged(relevance)
    per = kernels.contextual_precision(values, offsets)
    _, mean = kernels.mean_of_means(per, np.arange(len(per) + 1, dtype=np.int64))
    return MetricReport("contextual_precision", tuple(float(x) for x in per), float(mean),
                        tuple(len(r) for r in relevance))


def contextual_recall_from_support(support: Sequence[Sequence[Sequence[float]]]) -> MetricReport:
    """``support[i][j][c]`` scores expected statement j of item i against context c.

    A statement counts by its best context; items average their statements.
    """
    best = []
    for item in support:
        if not len(item):
            raise ValueError("contextual_recall: every item needs at least one statement")
        row = []
        for stmt in item:
            if not len(stmt):
                raise EmptyContexts("contextual_recall: statement scored against no context")
            row.append(max(float(x) for x in stmt))
        best.append(row)
    return mean_of_means(best, "contextual_recall")


def binarize(scores: Sequence[float], threshold: float = RELEVANCE_THRESHOLD) -> list[float]:
    return [1.0 if s >= threshold else 0.0 for s in scores]


# -- judge-driven forms ------------------------------------------------------

def _map(fn: Callable, items: Sequence[EvalItem], jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _need_contexts(item: EvalItem, metric: str) -> None:
    if not item.contexts:
        raise EmptyContexts(f"{metric}: item {item.query!r} has no retrieved contexts")


def _need_expected(item: EvalItem, metric: str) -> None:
    if not item.expected_answer or not item.expected_answer.strip():
        raise MissingExpectedAnswer(f"{metric}: item {item.query!r} has no expected answer")


def _statements(text: str, judge: Agent) -> list[str]:
    return decompose_statements(text, judge) if text.strip() else [""]


def answer_relevancy(items: Sequence[EvalItem], judge: Agent, jobs: int = 1) -> MetricReport:
    def item_scores(it: EvalItem) -> list[float]:
        return [score_pair("judge_answer_relevancy", it.query, s, judge)
                for s in _statements(it.answer, judge)]
    return answer_relevancy_from_scores(_map(item_scores, items, jobs))


def faithfulness(items: Sequence[EvalItem], judge: Agent, jobs: int = 1) -> MetricReport:
    def item_scores(it: EvalItem) -> list[float]:
        evidence = "\n\n".join(it.contexts)
        return [score_pair("judge_faithfulness", s, evidence, judge)
                for s in _statements(it.answer, judge)]
    return faithfulness_from_scores(_map(item_scores, items, jobs))


def contextual_relevancy(items: Sequence[EvalItem], judge: Agent, jobs: int = 1) -> MetricReport:
    for it in items:
        _need_contexts(it, "contextual_relevancy")

    def item_scores(it: EvalItem) -> list[float]:
        return [score_pair("judge_contextual_relevancy", it.query, c, judge) for c in it.contexts]
    return contextual_relevancy_from_scores(_map(item_scores, items, jobs))


def contextual_precision(items: Sequence[EvalItem], judge: Agent, jobs: int = 1,
                         threshold: float = RELEVANCE_THRESHOLD) -> MetricReport:
    for it in items:
        _need_contexts(it, "contextual_precision")
        _need_expected(it, "contextual_precision")

    def item_relevance(it: EvalItem) -> list[float]:
        graded = [score_pair("judge_contextual_precision", it.expected_answer, c, judge)
                  for c in it.contexts]
        return binarize(graded, threshold)
    return contextual_precision_from_relevance(_map(item_relevance, items, jobs))


def contextual_recall(items: Sequence[EvalItem], judge: Agent, jobs: int = 1) -> MetricReport:
    for it in items:
        _need_contexts(it, "contextual_recall")
        _need_expected(it, "contextual_recall")

    def item_support(it: EvalItem) -> list[list[float]]:
        return [[score_pair("judge_contextual_recall", s, c, judge) for c in it.contexts]
                for s in decompose_statements(it.expected_answer, judge)]
    return contextual_recall_from_support(_map(item_support, items, jobs))


METRIC_FUNCTIONS = {
    "answer_relevancy": answer_relevancy,
    "faithfulness": faithfulness,
    "contextual_relevancy": contextual_relevancy,
    "contextual_precision": contextual_precision,
    "contextual_recall": contextual_recall,
}
