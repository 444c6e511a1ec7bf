"""
Run traces: the complete, replayable record of one query's execution.
"""

import hashlib
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from anchorchain.config import TRACE_VERSION, Variant
from anchorchain.core.models import AgentDecision, StepResponse, SubQueryPlan, TranscriptEntry
from anchorchain.retrieval.base import RankedList

StopReason = Literal["esc_stop", "budget_exhausted", "error_fallback", "single_pass", "aborted"]

# Flags attached to degraded traces
FLAG_PLANNER_FALLBACK = "planner_fallback"
FLAG_CONTEXT_TRUNCATED = "context_truncated"
FLAG_RERANK_FALLBACK = "rerank_fallback"


class HopRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    hop_index: int = Field(ge=1)
    response: StepResponse
    decision: AgentDecision
    retrieved: Optional[RankedList] = None
    context_size_after: int = Field(ge=0)
    context_truncated: bool = False

    @model_validator(mode="after")
    def _no_retrieval_after_stop(self) -> "HopRecord":
        if self.decision.action == "STOP" and self.retrieved is not None:
            raise ValueError("a STOP hop cannot carry a retrieval")
        return self


class RunTrace(BaseModel):
    trace_version: int = TRACE_VERSION
    qid: str
    question: str
    variant: Variant
    plan: Optional[SubQueryPlan] = None
    anchor_retrievals: List[RankedList] = Field(default_factory=list)
    anchor_entries: List[str] = Field(default_factory=list)
    hops: List[HopRecord] = Field(default_factory=list)
    final_answer: str = ""
    stop_reason: StopReason
    errors: List[str] = Field(default_factory=list)
    flags: List[str] = Field(default_factory=list)
    completion_transcript: List[TranscriptEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _invariants(self) -> "RunTrace":
        if len(set(self.anchor_entries)) != len(self.anchor_entries):
            raise ValueError("anchor_entries contains duplicates")
        last = self.hops[-1].response.text if self.hops else ""
        if self.final_answer != last:
            raise ValueError("final_answer must equal the last hop's response text")
        return self

    def retrieved_chunk_ids(self) -> List[str]:
        """Every retrieved chunk (anchor first, then hops), first-occurrence order."""
        seen = set()
        ordered: List[str] = []
        lists = [self.anchor_entries] + [hop.retrieved.chunk_ids for hop in self.hops if hop.retrieved]
        for ids in lists:
            for chunk_id in ids:
                if chunk_id not in seen:
                    seen.add(chunk_id)
                    ordered.append(chunk_id)
        return ordered

    def context_sequence(self) -> List[List[str]]:
        """Context entry list seen at each hop (C_1 .. C_n)."""
        contexts: List[List[str]] = []
        current = list(self.anchor_entries)
        present = set(current)
        for hop in self.hops:
            contexts.append(list(current))
            if hop.retrieved is not None:
                for chunk_id in hop.retrieved.chunk_ids:
                    if chunk_id not in present:
                        present.add(chunk_id)
                        current.append(chunk_id)
        return contexts

    @property
    def loop_retrievals(self) -> int:
        return sum(1 for hop in self.hops if hop.retrieved is not None)

    def to_json_line(self) -> str:
        return self.model_dump_json()

    def digest(self) -> str:
        return hashlib.sha256(self.to_json_line().encode("utf-8")).hexdigest()
