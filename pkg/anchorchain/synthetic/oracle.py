"""
Oracle agents for synthetic runs: every role answers from the planted truth
and the passages actually rendered into its prompt.
"""

import json
import logging
import re
from typing import List, Optional, Set

from anchorchain.core.backends import ScriptedBackend
from anchorchain.core.models import CompletionRequest
from anchorchain.errors import BackendError
from anchorchain.synthetic.generator import SyntheticTruth, TruthRecord

logger = logging.getLogger(__name__)

INSUFFICIENT = "insufficient evidence"
MISSING_PREFIX = "Missing hop evidence:"

_PASSAGE_HEADER = re.compile(r"^Passage \d+ \[([^\]]+)\]", re.MULTILINE)
_PLAN_SIZE = re.compile(r"Output (\d+) terms")
_MISSING = re.compile(re.escape(MISSING_PREFIX) + r" (\S+ \S+)")
_RERANK_QUERY = re.compile(r"^Query: (.*)$", re.MULTILINE)


def context_doc_ids(prompt: str) -> Set[str]:
    """Parent document ids of the passages rendered into ``prompt``."""
    return {chunk_id.rpartition("#")[0] for chunk_id in _PASSAGE_HEADER.findall(prompt)}


def _missing_hop(record: TruthRecord, present: Set[str]) -> Optional[int]:
    for i, doc_id in enumerate(record.gold_doc_ids):
        if doc_id not in present:
            return i
    return None


class OracleAgents:
    """Responder callables, one per role, keyed on the request's qid."""

    def __init__(self, truth: SyntheticTruth):
        self.truth = truth

    def _record(self, req: CompletionRequest) -> TruthRecord:
        qid = req.metadata.get("qid", "")
        if qid not in self.truth:
            raise BackendError(f"oracle has no truth for qid {qid!r}")
        return self.truth[qid]

    def planner(self, req: CompletionRequest) -> str:
        record = self._record(req)
        match = _PLAN_SIZE.search(req.system_prompt)
        m = int(match.group(1)) if match else len(record.titles)
        searches = [{"reason": f"hop {i + 1}", "query": title} for i, title in enumerate(record.titles[:m])]
        return json.dumps({"searches": searches})

    def writer(self, req: CompletionRequest) -> str:
        record = self._record(req)
        missing = _missing_hop(record, context_doc_ids(req.user_prompt))
        if req.prompt_name == "ircot":
            if missing is None:
                return f"So the answer is: {record.answer}."
            left, right = record.chain[missing], record.chain[missing + 1]
            return f"The trail continues from {left} to {right}."
        return json.dumps({"answer": record.answer if missing is None else INSUFFICIENT})

    def esc(self, req: CompletionRequest) -> str:
        record = self._record(req)
        missing = _missing_hop(record, context_doc_ids(req.user_prompt))
        if missing is None:
            return json.dumps({"action": "STOP", "message": "every hop is covered"})
        title = record.titles[missing]
        decision = {"action": "CONTINUE", "message": f"{MISSING_PREFIX} {title}"}
        if req.prompt_name == "esc":
            decision["next_query"] = title
        return json.dumps(decision)

    def formulator(self, req: CompletionRequest) -> str:
        match = _MISSING.search(req.user_prompt)
        if match is None:
            raise BackendError("formulator prompt carries no missing-hop message")
        return json.dumps({"query": match.group(1)})

    def reranker(self, req: CompletionRequest) -> str:
        match = _RERANK_QUERY.search(req.user_prompt)
        terms: List[str] = match.group(1).split() if match else []
        passage = req.user_prompt.split("Passage:", 1)[-1]
        hits = sum(1 for term in terms if term in passage)
        return str(round(10 * hits / len(terms))) if terms else "0"

    def judge(self, req: CompletionRequest) -> str:
        same = req.metadata.get("predicted", "").strip() == req.metadata.get("gold", "").strip()
        return f"Explanation: exact string comparison.\nDecision: {'yes' if same else 'no'}"


def oracle_agents(truth: SyntheticTruth) -> ScriptedBackend:
    """A scripted backend whose every role is answered by the oracle."""
    agents = OracleAgents(truth)
    backend = ScriptedBackend({
        "planner": agents.planner,
        "writer": agents.writer,
        "esc": agents.esc,
        "formulator": agents.formulator,
        "reranker": agents.reranker,
        "judge": agents.judge,
    })
    backend.name = "oracle"
    return backend
