"""
Rerankers: turn a broad candidate list into a compact evidence set.

A reranker scores (query, ordered candidate texts) and returns one real score
per candidate. The default scorer is lexical and needs no model call.
"""

import abc
import logging
from typing import List, Optional, Sequence

from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import BackendError, ReplayMismatchError, RerankError, ScriptExhaustedError
from anchorchain.retrieval.base import RankedList
from anchorchain.retrieval.lexical import LexicalIndex, tokenize

logger = logging.getLogger(__name__)


class Reranker(abc.ABC):
    """Scores candidate passages against a query."""

    @abc.abstractmethod
    async def score(self, query: str, texts: Sequence[str], backend=None) -> List[float]:
        """Return one score per text, same order as ``texts``."""


class OverlapReranker(Reranker):
    """
    Share of the query's IDF mass covered by a passage:
    sum(idf(t) for query terms t in passage) / sum(idf(t) for query terms t).
    """

    def __init__(self, index: LexicalIndex):
        self.index = index

    def score_one(self, query_terms: Sequence[str], total: float, text: str) -> float:
        if total <= 0.0:
            return 0.0
        present = set(tokenize(text))
        covered = 0.0
        for term in query_terms:
            if term in present:
                covered += self.index.idf(term)
        return covered / total

    async def score(self, query: str, texts: Sequence[str], backend=None) -> List[float]:
        query_terms = sorted(set(tokenize(query)))
        total = 0.0
        for term in query_terms:
            total += self.index.idf(term)
        return [self.score_one(query_terms, total, text) for text in texts]


async def rerank(
    query: str,
    candidates: RankedList,
    final_k: int,
    reranker: Reranker,
    store: CorpusStore,
    backend=None,
) -> RankedList:
    """Rescore ``candidates`` with ``reranker`` and keep the best ``final_k``."""
    if not candidates.entries:
        raise ValueError("rerank needs at least one candidate")
    texts: List[str] = []
    for chunk_id in candidates.chunk_ids:
        chunk = store.get_chunk(chunk_id)
        texts.append(f"{chunk.title}\n{chunk.text}")
    try:
        scores = await reranker.score(query, texts, backend=backend)
    except (ReplayMismatchError, ScriptExhaustedError):
        raise
    except BackendError as e:
        raise RerankError(f"reranker failed: {e}", candidates=candidates) from e
    if len(scores) != len(texts):
        raise ValueError(f"reranker returned {len(scores)} scores for {len(texts)} candidates")
    return RankedList.from_scores(query, zip(candidates.chunk_ids, scores), final_k)


def candidate_fallback(candidates: RankedList, final_k: int, query: Optional[str] = None) -> RankedList:
    """Candidate order truncated to ``final_k``; used when a reranker backend fails."""
    return RankedList(query=query or candidates.query, entries=candidates.entries[:final_k])
