"""
The retriever agent: broad lexical candidates, optional dense fusion,
reranking to a compact evidence set.
"""

import logging
from typing import List, Optional

import numpy as np

from anchorchain.config import RetrievalConfig
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import ConfigError
from anchorchain.retrieval.base import RankedList
from anchorchain.retrieval.dense import DenseScorer
from anchorchain.retrieval.fusion import fuse_rrf
from anchorchain.retrieval.lexical import LexicalIndex, build_lexical_index
from anchorchain.retrieval.rerank import OverlapReranker, Reranker, rerank

logger = logging.getLogger(__name__)


class Retriever:
    """
    Pure function of (index, query, config) once built; safe to share across
    concurrent queries.
    """

    def __init__(
        self,
        store: CorpusStore,
        config: Optional[RetrievalConfig] = None,
        index: Optional[LexicalIndex] = None,
        reranker: Optional[Reranker] = None,
        dense_scorer: Optional[DenseScorer] = None,
    ):
        self.store = store
        self.config = config or RetrievalConfig()
        self.index = index or build_lexical_index(store.iter_chunks())
        self.reranker = reranker or OverlapReranker(self.index)
        self.dense_scorer = dense_scorer
        if self.config.fusion == "rrf_fusion" and dense_scorer is None:
            raise ConfigError("rrf_fusion needs a dense scorer")

    def search_lexical(self, query: str, k: int) -> RankedList:
        return self.index.search(query, k)

    def search_dense(self, query: str, k: int) -> RankedList:
        """Score every chunk with the dense hook; there is no vector index."""
        if self.dense_scorer is None:
            raise ConfigError("no dense scorer configured")
        ids = self.index.chunk_ids
        scores = np.fromiter(
            (self.dense_scorer(query, self.store.get_chunk(cid).text) for cid in ids),
            dtype=np.float64,
            count=len(ids),
        )
        return RankedList.from_scores(query, zip(ids, scores.tolist()), k)

    def candidates(self, query: str, cfg: RetrievalConfig) -> RankedList:
        lexical = self.search_lexical(query, cfg.candidate_k)
        if cfg.fusion == "lexical_only":
            return lexical
        legs: List[RankedList] = [lexical, self.search_dense(query, cfg.candidate_k)]
        return fuse_rrf(legs, cfg.candidate_k, cfg.rrf_constant)

    async def retrieve(self, query: str, cfg: Optional[RetrievalConfig] = None, backend=None) -> RankedList:
        """
        Two-stage retrieval. Reranker failures raise RerankError carrying the
        candidate list so callers can fall back to candidate order.
        """
        cfg = cfg or self.config
        candidates = self.candidates(query, cfg)
        if not candidates.entries:
            logger.debug(f"No candidates for query {query[:60]!r}")
            return RankedList(query=query)
        result = await rerank(query, candidates, cfg.final_k, self.reranker, self.store, backend=backend)
        logger.debug(f"Retrieved {len(result)} of {len(candidates)} candidates for {query[:60]!r}")
        return result
