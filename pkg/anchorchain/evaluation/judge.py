"""
Answer correctness judging: a template-driven model judge and a
deterministic exact-match judge backend for synthetic runs and tests.
"""

import asyncio
import logging
from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple

from anchorchain.config import JUDGE_MODEL
from anchorchain.core.backends import CompletionBackend
from anchorchain.core.logger import log_agent_action
from anchorchain.core.models import CompletionRequest, CompletionResult, Decoding
from anchorchain.core.parsers import parse_judge_output
from anchorchain.core.prompts import render_judge_prompt
from anchorchain.core.trace import RunTrace
from anchorchain.corpus.datasets import QARecord

logger = logging.getLogger(__name__)

FLAG_JUDGE_UNPARSED = "judge_unparsed"
JUDGE_RETRY_NOTE = "\n\nEnd your reply with a line of the form 'Decision: <yes|no>'."


class Judgment(NamedTuple):
    correct: int
    unparsed: bool


class ExactMatchJudgeBackend(CompletionBackend):
    """Answers judge requests by comparing the predicted and gold answers verbatim."""

    name = "exact_match"

    async def complete(self, req: CompletionRequest) -> CompletionResult:
        predicted = req.metadata.get("predicted", "").strip()
        gold = req.metadata.get("gold", "").strip()
        verdict = "yes" if predicted and predicted == gold else "no"
        return CompletionResult(text=f"Explanation: exact string comparison.\nDecision: {verdict}")


async def judge_correctness(
    question: str,
    predicted: str,
    gold_answer: str,
    judge_backend: CompletionBackend,
    model_id: str = JUDGE_MODEL,
    decoding: Decoding = Decoding(),
) -> Judgment:
    """
    Ask the judge whether ``predicted`` matches ``gold_answer``.

    Returns:
        Judgment with correct=1 iff the Decision line says yes. A reply with no
        Decision line is retried once, then scored 0 with unparsed=True.
    """
    prompt = render_judge_prompt(question, predicted, gold_answer)
    metadata = {"predicted": predicted, "gold": gold_answer}
    user = prompt.user
    for attempt in range(2):
        req = CompletionRequest(
            role_tag="judge",
            system_prompt=prompt.system,
            user_prompt=user,
            model_id=model_id,
            decoding=decoding,
            prompt_name=prompt.name,
            metadata=metadata,
        )
        result = await judge_backend.complete(req)
        decision = parse_judge_output(result.text)
        if decision is not None:
            return Judgment(decision, False)
        user = prompt.user + JUDGE_RETRY_NOTE
    log_agent_action("judge", FLAG_JUDGE_UNPARSED, "No Decision line after retry; scored 0",
                     {"question": question[:120]}, level=logging.WARNING)
    return Judgment(0, True)


async def judge_traces(
    traces: Sequence[RunTrace],
    records: Mapping[str, QARecord],
    judge_backend: CompletionBackend,
    model_id: str = JUDGE_MODEL,
    concurrency: int = 4,
) -> Tuple[Dict[str, int], List[str]]:
    """Correctness bit per qid plus the qids whose verdict could not be parsed."""
    semaphore = asyncio.Semaphore(concurrency)

    async def judge_one(trace: RunTrace) -> Tuple[str, Judgment]:
        record = records[trace.qid]
        async with semaphore:
            return trace.qid, await judge_correctness(
                record.question, trace.final_answer, record.answer, judge_backend, model_id
            )

    outcomes = await asyncio.gather(*(judge_one(t) for t in traces))
    bits = {qid: j.correct for qid, j in outcomes}
    unparsed = [qid for qid, j in outcomes if j.unparsed]
    logger.info(f"Judged {len(bits)} answers ({sum(bits.values())} correct, {len(unparsed)} unparsed)")
    return bits, unparsed
