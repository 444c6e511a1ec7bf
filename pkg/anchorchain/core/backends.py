"""
Completion backends: the remote chat-completion client, the scripted backend
used by tests and oracle runs, and transcript recording/replay wrappers.
"""

import abc
import asyncio
import logging
import time
from collections import deque
from typing import Callable, Deque, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import httpx

from anchorchain.config import (
    MAX_IN_FLIGHT,
    MAX_RETRIES,
    RATE_LIMIT_BURST,
    RATE_LIMIT_PER_SECOND,
    REQUEST_TIMEOUT_SECONDS,
    RETRY_BASE_DELAY,
)
from anchorchain.core.cache import ResponseCache
from anchorchain.core.models import CompletionRequest, CompletionResult, RecordedError, TranscriptEntry
from anchorchain.errors import BackendError, ReplayMismatchError, ScriptExhaustedError

logger = logging.getLogger(__name__)

Responder = Callable[[CompletionRequest], str]
Script = Union[Sequence[Union[str, CompletionResult]], Responder]

# HTTP statuses worth retrying
_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}

# Backend failures a transcript can carry and replay re-raises
_REPLAYABLE_ERRORS = {cls.__name__: cls for cls in (BackendError, ScriptExhaustedError)}


class CompletionBackend(abc.ABC):
    """Anything that can answer a CompletionRequest. Must accept concurrent calls."""

    name: str = "backend"

    @abc.abstractmethod
    async def complete(self, req: CompletionRequest) -> CompletionResult:
        ...

    async def close(self) -> None:
        pass


class ScriptedBackend(CompletionBackend):
    """
    Deterministic backend. Each role is scripted either with a queue of
    responses (served in order, one consumer per trace) or with a responder
    callable that computes the reply from the request.
    """

    name = "scripted"

    def __init__(self, scripts: Optional[Mapping[str, Script]] = None):
        self._queues: Dict[str, Deque[CompletionResult]] = {}
        self._responders: Dict[str, Responder] = {}
        self.calls: List[CompletionRequest] = []
        for role, script in (scripts or {}).items():
            self.program(role, script)

    def program(self, role: str, script: Script) -> None:
        if callable(script):
            self._responders[role] = script
            self._queues.pop(role, None)
            return
        queue = self._queues.setdefault(role, deque())
        for item in script:
            queue.append(item if isinstance(item, CompletionResult) else CompletionResult(text=item))

    def remaining(self, role: str) -> int:
        return len(self._queues.get(role, ()))

    async def complete(self, req: CompletionRequest) -> CompletionResult:
        self.calls.append(req)
        responder = self._responders.get(req.role_tag)
        if responder is not None:
            return CompletionResult(text=responder(req))
        queue = self._queues.get(req.role_tag)
        if not queue:
            raise ScriptExhaustedError(f"no scripted response left for role {req.role_tag!r}")
        return queue.popleft()


class TranscriptBackend(CompletionBackend):
    """Replays a recorded transcript in order, checking every request digest."""

    name = "replay"

    def __init__(self, transcript: Iterable[TranscriptEntry]):
        self._entries: Deque[TranscriptEntry] = deque(transcript)

    async def complete(self, req: CompletionRequest) -> CompletionResult:
        if not self._entries:
            raise ScriptExhaustedError("replay transcript exhausted")
        entry = self._entries[0]
        digest = req.digest()
        if entry.digest != digest or entry.role_tag != req.role_tag:
            raise ReplayMismatchError(
                f"replay diverged: expected {entry.role_tag}/{entry.digest[:12]}, got {req.role_tag}/{digest[:12]}"
            )
        self._entries.popleft()
        if entry.error is not None:
            raise _REPLAYABLE_ERRORS.get(entry.error.type, BackendError)(entry.error.message)
        return entry.result

    @property
    def exhausted(self) -> bool:
        return not self._entries


class RecordingBackend(CompletionBackend):
    """
    Wraps a shared backend and records one query's exchanges in call order.
    Backend failures are recorded too, so replay raises them at the same point.
    """

    def __init__(self, inner: CompletionBackend):
        self.inner = inner
        self.name = inner.name
        self.transcript: List[TranscriptEntry] = []

    async def complete(self, req: CompletionRequest) -> CompletionResult:
        try:
            result = await self.inner.complete(req)
        except ReplayMismatchError:
            raise
        except BackendError as e:
            self.transcript.append(TranscriptEntry(
                digest=req.digest(), role_tag=req.role_tag,
                error=RecordedError(type=type(e).__name__, message=str(e)),
            ))
            raise
        self.transcript.append(TranscriptEntry(digest=req.digest(), role_tag=req.role_tag, result=result))
        return result


class TokenBucket:
    """Token-bucket limiter: ``rate`` tokens per second, at most ``burst`` stored."""

    def __init__(self, rate: float = RATE_LIMIT_PER_SECOND, burst: int = RATE_LIMIT_BURST):
        self.rate = rate
        self.capacity = float(max(burst, 1))
        self._tokens = self.capacity
        self._updated = time.monotonic()
        self._lock = asyncio.Lock()

    async def acquire(self) -> None:
        async with self._lock:
            now = time.monotonic()
            self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
            self._updated = now
            if self._tokens < 1.0:
                wait = (1.0 - self._tokens) / self.rate
                await asyncio.sleep(wait)
                self._updated = time.monotonic()
                self._tokens = 0.0
            else:
                self._tokens -= 1.0


class RemoteBackend(CompletionBackend):
    """
    Chat-completion client over HTTP (OpenAI-compatible schema) with capped
    exponential-backoff retries, a max-in-flight limit, a token-bucket rate
    limit and an optional digest-keyed response cache.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str],
        cache: Optional[ResponseCache] = None,
        max_retries: int = MAX_RETRIES,
        base_delay: float = RETRY_BASE_DELAY,
        max_in_flight: int = MAX_IN_FLIGHT,
        rate_limit_per_second: float = RATE_LIMIT_PER_SECOND,
        timeout: float = REQUEST_TIMEOUT_SECONDS,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ):
        if not api_key:
            logger.warning("No API key configured; remote completion calls will likely be rejected.")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = httpx.AsyncClient(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout,
            transport=transport,
        )
        self.cache = cache
        self.max_retries = max_retries
        self.base_delay = base_delay
        self._in_flight = asyncio.Semaphore(max_in_flight)
        self._bucket = TokenBucket(rate_limit_per_second)
        self.upstream_calls = 0

    @staticmethod
    def _payload(req: CompletionRequest) -> dict:
        payload = {
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.decoding.temperature,
            "max_tokens": req.decoding.max_tokens,
        }
        if req.decoding.reasoning_effort is not None:
            payload["reasoning_effort"] = req.decoding.reasoning_effort
        return payload

    @staticmethod
    def _parse(data: dict, latency_ms: float) -> CompletionResult:
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendError(f"unexpected completion response shape: {e}") from e
        usage = data.get("usage") or {}
        return CompletionResult(
            text=text or "",
            usage={
                "prompt_tokens": int(usage.get("prompt_tokens", 0)),
                "completion_tokens": int(usage.get("completion_tokens", 0)),
            },
            latency_ms=latency_ms,
        )

    async def complete(self, req: CompletionRequest) -> CompletionResult:
        digest = req.digest()
        if self.cache is not None:
            cached = await self.cache.get(digest)
            if cached is not None:
                logger.debug(f"Cache hit for {req.role_tag} request {digest[:12]}")
                return cached

        result = await self._post_with_retry(req)
        if self.cache is not None:
            await self.cache.put(digest, req.model_id, result)
        return result

    async def _post_with_retry(self, req: CompletionRequest) -> CompletionResult:
        payload = self._payload(req)
        last_error: Optional[Exception] = None
        async with self._in_flight:
            for attempt in range(self.max_retries):
                await self._bucket.acquire()
                started = time.perf_counter()
                try:
                    self.upstream_calls += 1
                    response = await self.client.post("/chat/completions", json=payload)
                    if response.status_code in _RETRYABLE_STATUS:
                        raise httpx.HTTPStatusError(
                            f"retryable status {response.status_code}", request=response.request, response=response
                        )
                    if response.is_error:
                        raise BackendError(f"completion request rejected with HTTP {response.status_code}")
                    try:
                        data = response.json()
                    except ValueError as e:
                        raise BackendError(f"completion response is not JSON: {e}") from e
                    return self._parse(data, (time.perf_counter() - started) * 1000.0)
                except (httpx.TransportError, httpx.HTTPStatusError) as e:
                    last_error = e
                    delay = self.base_delay * (2 ** attempt)
                    logger.warning(
                        f"Completion call failed (attempt {attempt + 1}/{self.max_retries}): {e}; "
                        f"retrying in {delay:.1f}s"
                    )
                    if attempt + 1 < self.max_retries:
                        await asyncio.sleep(delay)
        raise BackendError(f"completion call failed after {self.max_retries} attempts: {last_error}")

    async def close(self) -> None:
        await self.client.aclose()
        if self.cache is not None:
            await self.cache.close()
