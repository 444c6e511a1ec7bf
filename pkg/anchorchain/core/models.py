"""
Agent runtime types: completion requests/results and the structured outputs
of each agent role.
"""

import hashlib
import json
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anchorchain.config import ReasoningEffort

RoleTag = Literal["planner", "writer", "esc", "formulator", "judge", "reranker"]
Action = Literal["CONTINUE", "STOP"]


class Decoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    temperature: float = Field(default=0.0, ge=0)
    max_tokens: int = Field(default=1024, gt=0)
    reasoning_effort: Optional[ReasoningEffort] = None


class CompletionRequest(BaseModel):
    """
    One chat-completion call. ``prompt_name`` and ``metadata`` are local
    bookkeeping (template used, qid, gold answers for scripted judges); they
    never leave the process and are not part of the digest.
    """

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    role_tag: RoleTag
    system_prompt: str = Field(min_length=1)
    user_prompt: str = Field(min_length=1)
    model_id: str
    decoding: Decoding = Field(default_factory=Decoding)
    prompt_name: str = ""
    metadata: Dict[str, str] = Field(default_factory=dict)

    def digest(self) -> str:
        """Lowercase hex SHA-256 of the canonicalized (model, prompts, decoding); unset decoding options are omitted."""
        canonical = json.dumps(
            {
                "model_id": self.model_id,
                "system_prompt": self.system_prompt,
                "user_prompt": self.user_prompt,
                "decoding": self.decoding.model_dump(exclude_none=True),
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Usage(BaseModel):
    model_config = ConfigDict(frozen=True)

    prompt_tokens: int = 0
    completion_tokens: int = 0


class CompletionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    usage: Usage = Field(default_factory=Usage)
    latency_ms: float = 0.0


class RecordedError(BaseModel):
    """A backend failure as it was raised: exception class name and message."""

    model_config = ConfigDict(frozen=True)

    type: str
    message: str


class TranscriptEntry(BaseModel):
    """One backend exchange as recorded in a run trace: a result or the error raised instead."""

    model_config = ConfigDict(frozen=True)

    digest: str
    role_tag: RoleTag
    result: Optional[CompletionResult] = None
    error: Optional[RecordedError] = None

    @model_validator(mode="after")
    def _result_xor_error(self) -> "TranscriptEntry":
        if (self.result is None) == (self.error is None):
            raise ValueError("a transcript entry holds exactly one of result or error")
        return self


class SearchItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    reason: str = ""
    query: str

    @field_validator("query")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("sub-query must not be empty")
        return value


class SubQueryPlan(BaseModel):
    """The planner's sub-queries, in the order they will be retrieved."""

    model_config = ConfigDict(frozen=True)

    searches: List[SearchItem] = Field(min_length=1)

    @property
    def queries(self) -> List[str]:
        return [s.query for s in self.searches]

    @classmethod
    def single(cls, question: str, reason: str = "original question") -> "SubQueryPlan":
        return cls(searches=[SearchItem(reason=reason, query=question)])


class AgentDecision(BaseModel):
    """Evidence-sufficiency decision: whether to retrieve again and with what query."""

    model_config = ConfigDict(frozen=True)

    action: Action
    next_query: Optional[str] = None
    message: str = ""

    @model_validator(mode="after")
    def _query_iff_continue(self) -> "AgentDecision":
        if self.action == "CONTINUE" and not (self.next_query and self.next_query.strip()):
            raise ValueError("CONTINUE requires a non-empty next_query")
        if self.action == "STOP" and self.next_query is not None:
            raise ValueError("STOP must not carry a next_query")
        return self


class StepResponse(BaseModel):
    """An intermediate or final answer produced at hop ``hop_index``."""

    model_config = ConfigDict(frozen=True)

    text: str
    hop_index: int = Field(default=1, ge=1)
