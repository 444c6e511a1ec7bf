"""
Completion response cache backed by SQLite (aiosqlite).
Keyed by the request digest so repeated ablation cells cost no upstream calls.
"""

import asyncio
import contextlib
import logging
from pathlib import Path
from typing import AsyncGenerator, Optional

import aiosqlite

from anchorchain.core.models import CompletionResult, Usage

logger = logging.getLogger(__name__)


class ResponseCache:
    """Persistent digest -> CompletionResult map. WAL mode for concurrent readers."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self._conn: Optional[aiosqlite.Connection] = None
        self._lock = asyncio.Lock()
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)

    @contextlib.asynccontextmanager
    async def _get_connection(self) -> AsyncGenerator[aiosqlite.Connection, None]:
        async with self._lock:
            if self._conn is None:
                self._conn = await aiosqlite.connect(self.db_path)
                self._conn.row_factory = aiosqlite.Row
                await self._conn.execute("PRAGMA journal_mode=WAL")
                await self._conn.execute("PRAGMA synchronous=NORMAL")
                await self._conn.execute("PRAGMA busy_timeout=5000")
                await self._conn.execute("""
                    CREATE TABLE IF NOT EXISTS completions (
                        digest TEXT PRIMARY KEY,
                        model_id TEXT NOT NULL,
                        text TEXT NOT NULL,
                        prompt_tokens INTEGER DEFAULT 0,
                        completion_tokens INTEGER DEFAULT 0,
                        latency_ms REAL DEFAULT 0,
                        created_at DATETIME DEFAULT CURRENT_TIMESTAMP
                    )
                """)
                await self._conn.commit()
                logger.debug(f"Response cache opened: {self.db_path}")
            yield self._conn

    async def get(self, digest: str) -> Optional[CompletionResult]:
        async with self._get_connection() as conn:
            async with conn.execute(
                "SELECT text, prompt_tokens, completion_tokens, latency_ms FROM completions WHERE digest = ?",
                (digest,),
            ) as cursor:
                row = await cursor.fetchone()
        if row is None:
            return None
        return CompletionResult(
            text=row["text"],
            usage=Usage(prompt_tokens=row["prompt_tokens"], completion_tokens=row["completion_tokens"]),
            latency_ms=row["latency_ms"],
        )

    async def put(self, digest: str, model_id: str, result: CompletionResult) -> None:
        async with self._get_connection() as conn:
            await conn.execute(
                """
                INSERT OR REPLACE INTO completions
                    (digest, model_id, text, prompt_tokens, completion_tokens, latency_ms)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                (
                    digest,
                    model_id,
                    result.text,
                    result.usage.prompt_tokens,
                    result.usage.completion_tokens,
                    result.latency_ms,
                ),
            )
            await conn.commit()

    async def count(self) -> int:
        async with self._get_connection() as conn:
            async with conn.execute("SELECT COUNT(*) FROM completions") as cursor:
                row = await cursor.fetchone()
                return row[0]

    async def close(self) -> None:
        async with self._lock:
            if self._conn:
                await self._conn.close()
                self._conn = None
