"""
Tests for completion backends, the response cache and request digests
"""

import hashlib
import json
import os

import httpx
import pytest

from anchorchain.core.backends import RecordingBackend, RemoteBackend, ScriptedBackend, TranscriptBackend
from anchorchain.core.cache import ResponseCache
from anchorchain.core.models import CompletionRequest, CompletionResult, Decoding, RecordedError, TranscriptEntry
from anchorchain.errors import BackendError, ReplayMismatchError, ScriptExhaustedError


def make_request(user="hello", role="writer", **kwargs):
    return CompletionRequest(
        role_tag=role, system_prompt="system", user_prompt=user, model_id="test-model", **kwargs
    )


def completion_body(text="ok"):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3},
    }


def remote(handler, **kwargs):
    return RemoteBackend(
        base_url="https://llm.test/v1",
        api_key="sk-test",
        base_delay=0.0,
        rate_limit_per_second=1000.0,
        transport=httpx.MockTransport(handler),
        **kwargs,
    )


class TestDigest:

    def test_metadata_is_not_part_of_digest(self):
        a = make_request(metadata={"qid": "q1"})
        b = make_request(metadata={"qid": "q2"}, prompt_name="other")
        assert a.digest() == b.digest()

    def test_prompt_and_decoding_change_digest(self):
        base = make_request()
        assert base.digest() != make_request(user="hello!").digest()
        assert base.digest() != make_request(decoding=Decoding(temperature=0.7)).digest()
        assert len(base.digest()) == 64
        assert base.digest() == base.digest().lower()

    def test_reasoning_effort_changes_digest_only_when_set(self):
        base = make_request()
        canonical = json.dumps(
            {"model_id": "test-model", "system_prompt": "system", "user_prompt": "hello",
             "decoding": {"temperature": 0.0, "max_tokens": 1024}},
            sort_keys=True, separators=(",", ":"), ensure_ascii=False,
        )
        assert base.digest() == hashlib.sha256(canonical.encode("utf-8")).hexdigest()
        medium = make_request(decoding=Decoding(reasoning_effort="medium"))
        assert medium.digest() != base.digest()
        assert medium.digest() != make_request(decoding=Decoding(reasoning_effort="none")).digest()


class TestScriptedBackend:

    @pytest.mark.asyncio
    async def test_queue_then_exhausted(self):
        backend = ScriptedBackend({"writer": ["one", "two"]})
        assert (await backend.complete(make_request())).text == "one"
        assert (await backend.complete(make_request())).text == "two"
        with pytest.raises(ScriptExhaustedError):
            await backend.complete(make_request())
        assert len(backend.calls) == 3

    @pytest.mark.asyncio
    async def test_responder(self):
        backend = ScriptedBackend({"esc": lambda req: req.user_prompt.upper()})
        assert (await backend.complete(make_request("abc", role="esc"))).text == "ABC"

    @pytest.mark.asyncio
    async def test_unscripted_role(self):
        with pytest.raises(ScriptExhaustedError):
            await ScriptedBackend().complete(make_request(role="judge"))


class TestReplay:

    @pytest.mark.asyncio
    async def test_record_then_replay(self):
        recorder = RecordingBackend(ScriptedBackend({"writer": ["first", "second"]}))
        await recorder.complete(make_request("a"))
        await recorder.complete(make_request("b"))
        assert [e.result.text for e in recorder.transcript] == ["first", "second"]

        replay = TranscriptBackend(recorder.transcript)
        assert (await replay.complete(make_request("a"))).text == "first"
        assert (await replay.complete(make_request("b"))).text == "second"
        assert replay.exhausted

    @pytest.mark.asyncio
    async def test_mismatch_does_not_consume(self):
        recorder = RecordingBackend(ScriptedBackend({"writer": ["first"]}))
        await recorder.complete(make_request("a"))
        replay = TranscriptBackend(recorder.transcript)
        with pytest.raises(ReplayMismatchError):
            await replay.complete(make_request("different"))
        assert (await replay.complete(make_request("a"))).text == "first"

    @pytest.mark.asyncio
    async def test_failures_are_recorded_and_replayed(self):
        def unavailable(req):
            raise BackendError("upstream unavailable")

        recorder = RecordingBackend(ScriptedBackend({"writer": ["first"], "esc": unavailable}))
        await recorder.complete(make_request("a"))
        with pytest.raises(BackendError):
            await recorder.complete(make_request("b", role="esc"))
        with pytest.raises(ScriptExhaustedError):
            await recorder.complete(make_request("c"))
        assert [e.result is None for e in recorder.transcript] == [False, True, True]
        assert recorder.transcript[2].error.type == "ScriptExhaustedError"

        replay = TranscriptBackend(recorder.transcript)
        assert (await replay.complete(make_request("a"))).text == "first"
        with pytest.raises(BackendError, match="^upstream unavailable$") as excinfo:
            await replay.complete(make_request("b", role="esc"))
        assert type(excinfo.value) is BackendError
        with pytest.raises(ScriptExhaustedError, match="no scripted response left for role 'writer'"):
            await replay.complete(make_request("c"))
        assert replay.exhausted

    def test_entry_holds_result_or_error(self):
        with pytest.raises(ValueError):
            TranscriptEntry(digest="d", role_tag="writer")
        with pytest.raises(ValueError):
            TranscriptEntry(
                digest="d", role_tag="writer", result=CompletionResult(text="x"),
                error=RecordedError(type="BackendError", message="boom"),
            )


class TestRemoteBackend:

    @pytest.mark.asyncio
    async def test_success(self):
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request)
            return httpx.Response(200, json=completion_body("answer"))

        backend = remote(handler)
        try:
            result = await backend.complete(make_request())
        finally:
            await backend.close()
        assert result.text == "answer"
        assert result.usage.prompt_tokens == 11
        payload = json.loads(seen[0].content)
        assert payload["model"] == "test-model"
        assert payload["messages"][1] == {"role": "user", "content": "hello"}
        assert seen[0].headers["Authorization"] == "Bearer sk-test"
        assert seen[0].url.path == "/v1/chat/completions"

    @pytest.mark.asyncio
    async def test_reasoning_effort_is_sent_only_when_set(self):
        payloads = []

        def handler(request):
            payloads.append(json.loads(request.content))
            return httpx.Response(200, json=completion_body())

        backend = remote(handler)
        try:
            await backend.complete(make_request())
            await backend.complete(make_request(decoding=Decoding(reasoning_effort="none")))
        finally:
            await backend.close()
        assert "reasoning_effort" not in payloads[0]
        assert payloads[1]["reasoning_effort"] == "none"

    @pytest.mark.asyncio
    async def test_retries_transient_failures(self):
        statuses = iter([503, 429, 200])

        def handler(request):
            status = next(statuses)
            if status != 200:
                return httpx.Response(status, json={"error": "busy"})
            return httpx.Response(200, json=completion_body("finally"))

        backend = remote(handler, max_retries=4)
        try:
            result = await backend.complete(make_request())
        finally:
            await backend.close()
        assert result.text == "finally"
        assert backend.upstream_calls == 3

    @pytest.mark.asyncio
    async def test_gives_up_after_max_retries(self):
        backend = remote(lambda request: httpx.Response(500), max_retries=2)
        try:
            with pytest.raises(BackendError):
                await backend.complete(make_request())
        finally:
            await backend.close()
        assert backend.upstream_calls == 2

    @pytest.mark.asyncio
    async def test_client_errors_are_not_retried(self):
        backend = remote(lambda request: httpx.Response(401, json={"error": "bad key"}))
        try:
            with pytest.raises(BackendError):
                await backend.complete(make_request())
        finally:
            await backend.close()
        assert backend.upstream_calls == 1

    @pytest.mark.asyncio
    async def test_transport_errors_are_retried(self):
        attempts = []

        def handler(request):
            attempts.append(request)
            if len(attempts) == 1:
                raise httpx.ConnectError("refused", request=request)
            return httpx.Response(200, json=completion_body())

        backend = remote(handler)
        try:
            assert (await backend.complete(make_request())).text == "ok"
        finally:
            await backend.close()
        assert len(attempts) == 2

    @pytest.mark.asyncio
    async def test_malformed_body(self):
        backend = remote(lambda request: httpx.Response(200, text="<html>oops</html>"))
        try:
            with pytest.raises(BackendError):
                await backend.complete(make_request())
        finally:
            await backend.close()

    @pytest.mark.asyncio
    async def test_cache_avoids_second_upstream_call(self, tmp_path):
        cache = ResponseCache(os.path.join(tmp_path, "cache.db"))
        backend = remote(lambda request: httpx.Response(200, json=completion_body("cached")), cache=cache)
        try:
            first = await backend.complete(make_request())
            second = await backend.complete(make_request(metadata={"qid": "other"}))
            assert await cache.count() == 1
        finally:
            await backend.close()
        assert first.text == second.text == "cached"
        assert backend.upstream_calls == 1


class TestResponseCache:

    @pytest.mark.asyncio
    async def test_put_get(self, tmp_path):
        cache = ResponseCache(os.path.join(tmp_path, "nested", "cache.db"))
        try:
            assert await cache.get("missing") is None
            await cache.put("abc", "m", CompletionResult(text="hi", latency_ms=12.5))
            hit = await cache.get("abc")
            assert hit.text == "hi"
            assert hit.latency_ms == 12.5
        finally:
            await cache.close()
