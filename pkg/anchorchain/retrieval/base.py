"""
Retrieval result types and the evidence context that accumulates across hops.
"""

from typing import Dict, Iterable, List, Literal, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

Stage = Literal["anchor", "hop"]


def rank_key(entry: Tuple[str, float]) -> Tuple[float, str]:
    """Global tie-break: score descending, then chunk id ascending."""
    chunk_id, score = entry
    return (-score, chunk_id)


class RankedList(BaseModel):
    """Scored chunk ids for one query, best first."""

    model_config = ConfigDict(frozen=True)

    query: str
    entries: List[Tuple[str, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _sorted_and_unique(self) -> "RankedList":
        ids = [chunk_id for chunk_id, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list contains duplicate chunk ids")
        if self.entries != sorted(self.entries, key=rank_key):
            raise ValueError("ranked list is not in (score desc, chunk_id asc) order")
        return self

    @classmethod
    def from_scores(cls, query: str, scores: Iterable[Tuple[str, float]], k: int) -> "RankedList":
        ranked = sorted(((cid, float(s)) for cid, s in scores), key=rank_key)
        return cls(query=query, entries=ranked[:k])

    @property
    def chunk_ids(self) -> List[str]:
        return [chunk_id for chunk_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: Stage
    hop_index: int
    source_query: str


class EvidenceContext(BaseModel):
    """Duplicate-free chunk ids in first-insertion order, with where each came from."""

    model_config = ConfigDict(frozen=True)

    entries: List[str] = Field(default_factory=list)
    provenance: Dict[str, Provenance] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self) -> "EvidenceContext":
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("evidence context contains duplicates")
        if set(self.provenance) - set(self.entries):
            raise ValueError("provenance recorded for chunks not in the context")
        return self

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, chunk_id: object) -> bool:
        return chunk_id in self.provenance or chunk_id in self.entries


def merge_dedup(
    ctx: EvidenceContext,
    new: RankedList,
    stage: Stage,
    hop_index: int,
    source_query: str,
) -> EvidenceContext:
    """
    Append the chunks of ``new`` that are not yet in ``ctx``, in rank order.
    Existing entries and their provenance are left untouched.
    """
    present = set(ctx.entries)
    entries = list(ctx.entries)
    provenance = dict(ctx.provenance)
    for chunk_id in new.chunk_ids:
        if chunk_id in present:
            continue
        present.add(chunk_id)
        entries.append(chunk_id)
        provenance[chunk_id] = Provenance(stage=stage, hop_index=hop_index, source_query=source_query)
    return EvidenceContext(entries=entries, provenance=provenance)


def context_from_lists(lists: Sequence[RankedList], stage: Stage = "anchor") -> EvidenceContext:
    ctx = EvidenceContext()
    for i, ranked in enumerate(lists):
        ctx = merge_dedup(ctx, ranked, stage, i, ranked.query)
    return ctx
