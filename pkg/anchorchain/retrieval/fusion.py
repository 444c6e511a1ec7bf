"""
Reciprocal rank fusion of several ranked lists.
"""

from typing import Dict, Sequence

from anchorchain.config import RRF_CONSTANT
from anchorchain.retrieval.base import RankedList


def fuse_rrf(lists: Sequence[RankedList], k: int, rrf_constant: float = RRF_CONSTANT) -> RankedList:
    """
    score(c) = sum over lists containing c of 1 / (rrf_constant + rank), rank 1-based.
    The fused list keeps the first input's query text.
    """
    if not lists:
        raise ValueError("fuse_rrf needs at least one ranked list")
    fused: Dict[str, float] = {}
    for ranked in lists:
        for rank, chunk_id in enumerate(ranked.chunk_ids, start=1):
            fused[chunk_id] = fused.get(chunk_id, 0.0) + 1.0 / (rrf_constant + rank)
    return RankedList.from_scores(lists[0].query, fused.items(), k)
