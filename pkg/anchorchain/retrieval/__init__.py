"""
Retrieval layer: BM25 candidates, rank fusion, reranking and evidence contexts.
"""

from .base import EvidenceContext, Provenance, RankedList, context_from_lists, merge_dedup
from .fusion import fuse_rrf
from .lexical import LexicalIndex, build_lexical_index, tokenize
from .rerank import OverlapReranker, Reranker, candidate_fallback, rerank
from .retriever import Retriever

__all__ = [
    'EvidenceContext',
    'LexicalIndex',
    'OverlapReranker',
    'Provenance',
    'RankedList',
    'Reranker',
    'Retriever',
    'build_lexical_index',
    'candidate_fallback',
    'context_from_lists',
    'fuse_rrf',
    'merge_dedup',
    'rerank',
    'tokenize',
]
