"""
Corpus domain types: source documents, chunks and ingestion statistics.
"""

from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Separator between a document id and the chunk ordinal
CHUNK_ID_SEPARATOR = "#"


def make_chunk_id(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}{CHUNK_ID_SEPARATOR}{ordinal}"


def parent_doc_id(chunk_id: str) -> str:
    """Recover the document id from a chunk id (doc ids may themselves contain '#')."""
    doc_id, sep, ordinal = chunk_id.rpartition(CHUNK_ID_SEPARATOR)
    if not sep or not ordinal.isdigit():
        raise ValueError(f"not a chunk id: {chunk_id!r}")
    return doc_id


class SourceDocument(BaseModel):
    """One record of a corpus file."""

    model_config = ConfigDict(frozen=True)

    doc_id: str = Field(min_length=1)
    title: str = ""
    body: str = ""

    @model_validator(mode="after")
    def _title_or_body(self) -> "SourceDocument":
        if not self.body and not self.title:
            raise ValueError("document needs a title when its body is empty")
        return self


class Chunk(BaseModel):
    """One indexed passage; the unit of retrieval and evaluation."""

    model_config = ConfigDict(frozen=True)

    chunk_id: str
    doc_id: str
    title: str
    text: str
    char_span: Tuple[int, int]

    @model_validator(mode="after")
    def _span_matches_text(self) -> "Chunk":
        start, end = self.char_span
        if start < 0 or end < start or end - start != len(self.text):
            raise ValueError(f"invalid char_span {self.char_span} for chunk {self.chunk_id}")
        return self

    @property
    def ordinal(self) -> int:
        return int(self.chunk_id.rpartition(CHUNK_ID_SEPARATOR)[2])


class CorpusStats(BaseModel):
    n_documents: int
    n_chunks: int
    mean_chunk_chars: float
