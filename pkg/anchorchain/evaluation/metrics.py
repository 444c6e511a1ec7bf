"""
Retrieval and answer-quality metrics over run traces.

Recall is the per-query any-hit indicator; All-Pass requires every gold
document; NDCG uses binary relevance over the run's deduplicated,
first-occurrence document ranking.
"""

import logging
from collections import defaultdict
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from anchorchain.config import METRICS_VERSION
from anchorchain.core.trace import RunTrace
from anchorchain.corpus.datasets import QARecord
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import DataError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("correct", "recall", "ndcg", "all_pass")


class RetrievalJudgment(BaseModel):
    model_config = ConfigDict(frozen=True)

    qid: str
    retrieved_doc_ids_ordered: List[str] = Field(default_factory=list)
    gold_doc_ids: FrozenSet[str] = Field(min_length=1)
    n_required: int = Field(ge=1)

    @model_validator(mode="after")
    def _deduplicated(self) -> "RetrievalJudgment":
        if len(set(self.retrieved_doc_ids_ordered)) != len(self.retrieved_doc_ids_ordered):
            raise ValueError("retrieved_doc_ids_ordered must be deduplicated")
        return self


class QueryMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    qid: str
    correct: int = Field(ge=0, le=1)
    recall: int = Field(ge=0, le=1)
    ndcg: float = Field(ge=0.0, le=1.0)
    all_pass: int = Field(ge=0, le=1)
    n_required: int = Field(ge=1)


class GroupAggregate(BaseModel):
    count: int
    correct: float
    recall: float
    ndcg: float
    all_pass: float


class MetricReport(BaseModel):
    metrics_version: int = METRICS_VERSION
    per_query: Dict[str, QueryMetrics]
    aggregates: Dict[str, float]
    by_required_length: Dict[int, GroupAggregate]
    n_queries: int
    judge_unparsed: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "MetricReport":
        if self.n_queries != len(self.per_query):
            raise ValueError("n_queries does not match per_query")
        if self.aggregates and self.aggregates["all_pass"] > self.aggregates["recall"]:
            raise ValueError("mean all_pass exceeds mean recall")
        return self


def _require_gold(j: RetrievalJudgment) -> None:
    if not j.gold_doc_ids:
        raise DataError(f"{j.qid}: empty gold set")


def recall_any_hit(j: RetrievalJudgment) -> int:
    """1 iff at least one gold document was retrieved."""
    _require_gold(j)
    return int(any(doc_id in j.gold_doc_ids for doc_id in j.retrieved_doc_ids_ordered))


def all_pass(j: RetrievalJudgment) -> int:
    """1 iff every gold document was retrieved."""
    _require_gold(j)
    return int(j.gold_doc_ids <= set(j.retrieved_doc_ids_ordered))


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=np.float64))


def ndcg_at_k(j: RetrievalJudgment, k: Optional[int] = None) -> float:
    """
    DCG@k / IDCG@k with gain 2^rel - 1 and discount log2(rank + 1).
    k defaults to the number of retrieved documents; empty retrieval scores 0.
    """
    _require_gold(j)
    retrieved = j.retrieved_doc_ids_ordered
    if k is None:
        k = len(retrieved)
    elif k < 1:
        raise ValueError("k must be at least 1")
    if not retrieved:
        return 0.0
    ranked = retrieved[:k]
    rel = np.fromiter((doc_id in j.gold_doc_ids for doc_id in ranked), dtype=np.float64, count=len(ranked))
    dcg = float(np.sum((np.power(2.0, rel) - 1.0) * _discounts(len(ranked))))
    ideal = min(k, len(j.gold_doc_ids))
    idcg = float(np.sum(_discounts(ideal)))
    return min(1.0, dcg / idcg)


def judgment_from_trace(trace: RunTrace, record: QARecord, store: CorpusStore) -> RetrievalJudgment:
    """Parent documents of every retrieved chunk, first-occurrence order."""
    seen = set()
    docs: List[str] = []
    for chunk_id in trace.retrieved_chunk_ids():
        doc_id = store.get_chunk(chunk_id).doc_id
        if doc_id not in seen:
            seen.add(doc_id)
            docs.append(doc_id)
    return RetrievalJudgment(
        qid=trace.qid,
        retrieved_doc_ids_ordered=docs,
        gold_doc_ids=frozenset(record.gold_doc_ids),
        n_required=record.n_required,
    )


def _means(rows: Sequence[QueryMetrics]) -> Dict[str, float]:
    if not rows:
        return {name: 0.0 for name in METRIC_NAMES}
    table = np.array([[getattr(r, name) for name in METRIC_NAMES] for r in rows], dtype=np.float64)
    return dict(zip(METRIC_NAMES, table.mean(axis=0).tolist()))


def aggregate(
    judgments: Sequence[RetrievalJudgment],
    correctness_bits: Mapping[str, int],
    judge_unparsed: Sequence[str] = (),
) -> MetricReport:
    """Per-query metrics, their means, and means grouped by required chain length."""
    judged = [j.qid for j in judgments]
    if set(judged) != set(correctness_bits) or len(judged) != len(set(judged)):
        missing = sorted(set(judged) ^ set(correctness_bits))
        raise DataError(f"judgments and correctness bits cover different qids: {missing}")

    per_query: Dict[str, QueryMetrics] = {}
    groups: Dict[int, List[QueryMetrics]] = defaultdict(list)
    for j in judgments:
        row = QueryMetrics(
            qid=j.qid,
            correct=int(correctness_bits[j.qid]),
            recall=recall_any_hit(j),
            ndcg=ndcg_at_k(j),
            all_pass=all_pass(j),
            n_required=j.n_required,
        )
        per_query[j.qid] = row
        groups[j.n_required].append(row)

    by_length = {
        n: GroupAggregate(count=len(rows), **_means(rows))
        for n, rows in sorted(groups.items())
    }
    return MetricReport(
        per_query=per_query,
        aggregates=_means(list(per_query.values())),
        by_required_length=by_length,
        n_queries=len(per_query),
        judge_unparsed=sorted(judge_unparsed),
    )
