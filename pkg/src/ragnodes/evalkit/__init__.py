"""Judge-scored RAG metrics, per-page datasets and the evaluation runner."""

from __future__ import annotations

from .dataset import generate_eval_dataset, generate_for_graphs, load_dataset, save_dataset
from .judge import ALLOWED_SCORES, JudgeScore, decompose_statements, judge_request, judge_score, snap
from .metrics import (METRICS, RELEVANCE_THRESHOLD, EvalItem, MetricReport, answer_relevancy,
                      answer_relevancy_from_scores, binarize, contextual_precision,
                      contextual_precision_from_relevance, contextual_recall,
                      contextual_recall_from_support, contextual_relevancy,
                      contextual_relevancy_from_scores, faithfulness, faithfulness_from_scores)
from .runner import EvalReport, RagPipeline, run_evaluation

__all__ = [
    "ALLOWED_SCORES", "METRICS", "RELEVANCE_THRESHOLD", "EvalItem", "EvalReport", "JudgeScore",
    "MetricReport", "RagPipeline", "answer_relevancy", "answer_relevancy_from_scores", "binarize",
    "contextual_precision", "contextual_precision_from_relevance", "contextual_recall",
    "contextual_recall_from_support", "contextual_relevancy", "contextual_relevancy_from_scores",
    "decompose_statements", "faithfulness", "faithfulness_from_scores", "generate_eval_dataset",
    "generate_for_graphs", "judge_request", "judge_score", "load_dataset", "run_evaluation",
    "save_dataset", "snap",
]
