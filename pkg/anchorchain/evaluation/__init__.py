"""
Evaluation: retrieval metrics, correctness judging and report rendering.
"""

from .judge import ExactMatchJudgeBackend, judge_correctness
from .metrics import (
    MetricReport,
    RetrievalJudgment,
    aggregate,
    all_pass,
    judgment_from_trace,
    ndcg_at_k,
    recall_any_hit,
)
from .report import evaluate, write_per_query, write_report

__all__ = [
    'ExactMatchJudgeBackend',
    'MetricReport',
    'RetrievalJudgment',
    'aggregate',
    'all_pass',
    'evaluate',
    'judge_correctness',
    'judgment_from_trace',
    'ndcg_at_k',
    'recall_any_hit',
    'write_per_query',
    'write_report',
]
