"""
Batch execution: bounded-parallel queries, an append-only trace file that
doubles as the resume checkpoint, and transcript replay.
"""

import asyncio
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from anchorchain.core.backends import TranscriptBackend
from anchorchain.core.logger import log_run_end, log_run_start
from anchorchain.core.pipeline import Pipeline
from anchorchain.core.trace import RunTrace
from anchorchain.corpus.datasets import QARecord, iter_jsonl
from anchorchain.errors import DataError

logger = logging.getLogger(__name__)


def load_traces(path: str) -> Dict[str, RunTrace]:
    """qid -> trace for every line of a trace file. A missing file is empty."""
    traces: Dict[str, RunTrace] = {}
    if not Path(path).exists():
        return traces
    for lineno, obj in iter_jsonl(path):
        try:
            trace = RunTrace.model_validate(obj)
        except ValidationError as e:
            raise DataError(f"invalid trace: {e.errors()[0]['msg']}", line=lineno, path=path) from e
        traces[trace.qid] = trace
    return traces


def repair_torn_tail(path: str) -> bool:
    """
    Make an interrupted append resumable. A final line without its newline is
    either completed (it parses) or cut off (it does not), so its qid reruns.
    Returns True when the file was changed.
    """
    file = Path(path)
    if not file.is_file():
        return False
    data = file.read_bytes()
    if not data or data.endswith(b"\n"):
        return False
    cut = data.rfind(b"\n") + 1
    try:
        json.loads(data[cut:])
    except ValueError:
        logger.warning(f"Dropping a half-written trace at the end of {path}; its query will run again")
        with open(path, "r+b") as f:
            f.truncate(cut)
        return True
    with open(path, "ab") as f:
        f.write(b"\n")
    return True


class TraceSink:
    """Appends one trace per line; the only shared mutable state of a batch."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._lock = asyncio.Lock()
        if path:
            repair_torn_tail(path)
        self.existing: Dict[str, RunTrace] = load_traces(path) if path else {}
        if path:
            Path(path).parent.mkdir(parents=True, exist_ok=True)

    async def append(self, trace: RunTrace) -> None:
        if self.path is None:
            return
        line = trace.to_json_line()
        async with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")


def _failed_trace(pipeline: Pipeline, record: QARecord, error: Exception) -> RunTrace:
    return RunTrace(
        qid=record.qid,
        question=record.question,
        variant=pipeline.config.variant,
        stop_reason="aborted",
        errors=[f"query aborted: {type(error).__name__}: {error}"],
    )


async def run_batch(
    records: Sequence[QARecord],
    pipeline: Pipeline,
    parallelism: int = 1,
    trace_path: Optional[str] = None,
    run_id: Optional[str] = None,
) -> List[RunTrace]:
    """
    Run every record, skipping qids already present in ``trace_path``.
    Traces are appended in completion order; the returned list is in dataset order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    sink = TraceSink(trace_path)
    pending = [r for r in records if r.qid not in sink.existing]
    run_id = run_id or "batch"
    log_run_start(run_id, f"{pipeline.config.variant} over {len(records)} queries",
                  {"pending": len(pending), "resumed": len(records) - len(pending), "parallelism": parallelism})

    semaphore = asyncio.Semaphore(parallelism)
    results: Dict[str, RunTrace] = {}

    async def run_one(record: QARecord) -> None:
        async with semaphore:
            try:
                trace = await pipeline.run_query(record.qid, record.question)
            except Exception as e:
                logger.exception(f"Unexpected failure on {record.qid}")
                trace = _failed_trace(pipeline, record, e)
            await sink.append(trace)
            results[record.qid] = trace

    await asyncio.gather(*(run_one(r) for r in pending))

    ordered = [results.get(r.qid) or sink.existing[r.qid] for r in records]
    aborted = sum(1 for t in ordered if t.stop_reason == "aborted")
    log_run_end(run_id, f"{len(pending)} executed, {aborted} aborted", {"aborted": aborted})
    return ordered


async def replay_trace(trace: RunTrace, pipeline: Pipeline) -> RunTrace:
    """Re-execute a trace against its own recorded completions."""
    if trace.variant != pipeline.config.variant:
        raise ValueError(f"trace variant {trace.variant} does not match pipeline variant {pipeline.config.variant}")
    replayer = TranscriptBackend(trace.completion_transcript)
    return await pipeline.with_backend(replayer).run_query(trace.qid, trace.question)

