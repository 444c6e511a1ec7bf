"""
Splitting document bodies into overlapping, span-addressed chunks.
"""

from typing import List, Optional

from anchorchain.config import ChunkingConfig
from anchorchain.corpus.base import Chunk, SourceDocument, make_chunk_id

# Preferred break points, strongest first
_BOUNDARIES = ("\n\n", "\n", ". ", "? ", "! ", "; ", " ")


def _boundary_before(body: str, lo: int, hi: int) -> Optional[int]:
    """Latest boundary end position in (lo, hi], or None."""
    for marker in _BOUNDARIES:
        pos = body.rfind(marker, lo, hi)
        if pos != -1:
            return pos + len(marker)
    return None


def chunk_document(doc: SourceDocument, cfg: ChunkingConfig) -> List[Chunk]:
    """
    Split ``doc.body`` into chunks of at most ``cfg.max_chars`` characters.

    Consecutive chunks share exactly ``cfg.overlap_chars`` characters. With
    ``split_on_boundaries`` a chunk ends at the last paragraph, sentence or
    word boundary in its second half instead of mid-word.
    """
    body = doc.body
    length = len(body)
    chunks: List[Chunk] = []
    start = 0
    while start < length:
        end = min(start + cfg.max_chars, length)
        if end < length and cfg.split_on_boundaries:
            lo = max(start + cfg.overlap_chars + 1, start + cfg.max_chars // 2)
            boundary = _boundary_before(body, lo, end)
            if boundary is not None:
                end = boundary
        chunks.append(Chunk(
            chunk_id=make_chunk_id(doc.doc_id, len(chunks)),
            doc_id=doc.doc_id,
            title=doc.title,
            text=body[start:end],
            char_span=(start, end),
        ))
        if end >= length:
            break
        start = end - cfg.overlap_chars
    return chunks
