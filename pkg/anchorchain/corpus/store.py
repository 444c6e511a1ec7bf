"""
Corpus store: chunked documents kept in memory and persisted to SQLite.

Ingestion is single-writer; afterwards the store is read-only and safe to
share between concurrent queries.
"""

import asyncio
import contextlib
import hashlib
import logging
from pathlib import Path
from typing import AsyncGenerator, Dict, Iterator, List, Optional

import aiosqlite
from pydantic import ValidationError

from anchorchain.config import ChunkingConfig
from anchorchain.corpus.base import Chunk, CorpusStats, SourceDocument
from anchorchain.corpus.chunking import chunk_document
from anchorchain.corpus.datasets import iter_jsonl
from anchorchain.errors import DataError, UnknownChunkError

logger = logging.getLogger(__name__)


class CorpusStore:
    """
    Chunk store with an in-memory map for lookups and an optional aiosqlite
    file for persistence between CLI invocations.
    """

    def __init__(self, db_path: Optional[str] = None):
        self.db_path = db_path
        self._documents: Dict[str, SourceDocument] = {}
        self._chunks: Dict[str, Chunk] = {}
        self._conn: Optional[aiosqlite.Connection] = None
        self._lock = asyncio.Lock()

    # --- Ingestion ---

    async def ingest_corpus(self, path: str, cfg: ChunkingConfig) -> CorpusStats:
        """Read a corpus file, chunk every document and persist the result."""
        if self._documents:
            raise DataError("corpus store already populated; ingestion is write-once")

        documents: List[SourceDocument] = []
        seen = set()
        for lineno, raw in iter_jsonl(path):
            try:
                doc = SourceDocument(
                    doc_id=raw.get("doc_id"),
                    title=raw.get("title", ""),
                    body=raw.get("text", ""),
                )
            except ValidationError as e:
                raise DataError(f"malformed document: {e.errors()[0]['msg']}", line=lineno, path=path) from e
            if doc.doc_id in seen:
                raise DataError(f"duplicate doc_id {doc.doc_id!r}", line=lineno, path=path)
            seen.add(doc.doc_id)
            documents.append(doc)

        for doc in documents:
            self._add_document(doc, chunk_document(doc, cfg))

        stats = self.stats()
        logger.info(
            f"Ingested {stats.n_documents} documents into {stats.n_chunks} chunks "
            f"(mean {stats.mean_chunk_chars:.1f} chars)"
        )
        if self.db_path:
            await self.save()
        return stats

    def _add_document(self, doc: SourceDocument, chunks: List[Chunk]) -> None:
        self._documents[doc.doc_id] = doc
        for chunk in chunks:
            self._chunks[chunk.chunk_id] = chunk

    # --- Reads ---

    def get_chunk(self, chunk_id: str) -> Chunk:
        try:
            return self._chunks[chunk_id]
        except KeyError:
            raise UnknownChunkError(chunk_id) from None

    def has_chunk(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def get_document(self, doc_id: str) -> SourceDocument:
        try:
            return self._documents[doc_id]
        except KeyError:
            raise DataError(f"unknown doc id: {doc_id!r}") from None

    def iter_chunks(self) -> Iterator[Chunk]:
        """Chunks in ingestion order (documents in file order, ordinals ascending)."""
        return iter(self._chunks.values())

    def __len__(self) -> int:
        return len(self._chunks)

    def stats(self) -> CorpusStats:
        n_chunks = len(self._chunks)
        total = sum(len(c.text) for c in self._chunks.values())
        return CorpusStats(
            n_documents=len(self._documents),
            n_chunks=n_chunks,
            mean_chunk_chars=total / n_chunks if n_chunks else 0.0,
        )

    def digest(self) -> str:
        """SHA-256 over chunk ids and texts in ingestion order."""
        h = hashlib.sha256()
        for chunk in self._chunks.values():
            h.update(chunk.chunk_id.encode("utf-8"))
            h.update(b"\x00")
            h.update(chunk.title.encode("utf-8"))
            h.update(b"\x00")
            h.update(chunk.text.encode("utf-8"))
            h.update(b"\x01")
        return h.hexdigest()

    # --- Persistence ---

    @contextlib.asynccontextmanager
    async def _get_connection(self) -> AsyncGenerator[aiosqlite.Connection, None]:
        async with self._lock:
            if self._conn is None:
                if not self.db_path:
                    raise DataError("corpus store has no database path")
                Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
                self._conn = await aiosqlite.connect(self.db_path)
                self._conn.row_factory = aiosqlite.Row
                await self._conn.execute("PRAGMA journal_mode=WAL")
                await self._conn.execute("PRAGMA synchronous=NORMAL")
                await self._conn.execute("""
                    CREATE TABLE IF NOT EXISTS documents (
                        doc_id TEXT PRIMARY KEY,
                        title TEXT NOT NULL,
                        body TEXT NOT NULL
                    )
                """)
                await self._conn.execute("""
                    CREATE TABLE IF NOT EXISTS chunks (
                        chunk_id TEXT PRIMARY KEY,
                        doc_id TEXT NOT NULL,
                        title TEXT NOT NULL,
                        text TEXT NOT NULL,
                        span_start INTEGER NOT NULL,
                        span_end INTEGER NOT NULL,
                        FOREIGN KEY(doc_id) REFERENCES documents(doc_id)
                    )
                """)
                await self._conn.commit()
            yield self._conn

    async def save(self) -> None:
        """Write the whole store, replacing any previous contents of the file."""
        async with self._get_connection() as conn:
            await conn.execute("DELETE FROM chunks")
            await conn.execute("DELETE FROM documents")
            await conn.executemany(
                "INSERT INTO documents (doc_id, title, body) VALUES (?, ?, ?)",
                [(d.doc_id, d.title, d.body) for d in self._documents.values()],
            )
            await conn.executemany(
                "INSERT INTO chunks (chunk_id, doc_id, title, text, span_start, span_end) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                [
                    (c.chunk_id, c.doc_id, c.title, c.text, c.char_span[0], c.char_span[1])
                    for c in self._chunks.values()
                ],
            )
            await conn.commit()
        logger.debug(f"Corpus store saved to {self.db_path}")

    @classmethod
    async def open(cls, db_path: str) -> "CorpusStore":
        """Load a persisted store into memory."""
        if not Path(db_path).is_file():
            raise DataError(f"corpus store not found: {db_path}")
        store = cls(db_path)
        async with store._get_connection() as conn:
            async with conn.execute("SELECT doc_id, title, body FROM documents ORDER BY rowid") as cursor:
                for row in await cursor.fetchall():
                    doc = SourceDocument(doc_id=row["doc_id"], title=row["title"], body=row["body"])
                    store._documents[doc.doc_id] = doc
            async with conn.execute(
                "SELECT chunk_id, doc_id, title, text, span_start, span_end FROM chunks ORDER BY rowid"
            ) as cursor:
                for row in await cursor.fetchall():
                    store._chunks[row["chunk_id"]] = Chunk(
                        chunk_id=row["chunk_id"],
                        doc_id=row["doc_id"],
                        title=row["title"],
                        text=row["text"],
                        char_span=(row["span_start"], row["span_end"]),
                    )
        # everything lives in memory from here on
        await store.close()
        logger.info(f"Opened corpus store {db_path}: {len(store._chunks)} chunks")
        return store

    async def close(self) -> None:
        async with self._lock:
            if self._conn:
                await self._conn.close()
                self._conn = None
