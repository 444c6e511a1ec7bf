"""
Structured-output parsers for each agent role.

Every parser either returns a value or raises ParseError; arbitrary model
text never produces any other exception.
"""

import json
import logging
import re
from typing import Any, Dict, Iterator, Optional, Tuple

from pydantic import ValidationError

from anchorchain.core.models import AgentDecision, SearchItem, StepResponse, SubQueryPlan
from anchorchain.errors import ParseError

logger = logging.getLogger(__name__)

_DECISION_LINE = re.compile(r"^\s*\**\s*decision\s*\**\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)
_ANSWER_MARKER = re.compile(r"so the answer is\s*:?\s*(.+)", re.IGNORECASE | re.DOTALL)
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")

# Most candidate spans tried per text
_MAX_CANDIDATES = 64


def _balanced_spans(text: str) -> Iterator[str]:
    """Candidate ``{...}`` substrings from one string-aware pass, in order of their opening brace."""
    opens = []
    spans = []
    in_string = False
    escaped = False
    for pos, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            # quotes only delimit strings inside an object
            in_string = bool(opens)
        elif ch == "{":
            opens.append(pos)
        elif ch == "}" and opens:
            spans.append((opens.pop(), pos + 1))
    spans.sort()
    for start, end in spans[:_MAX_CANDIDATES]:
        yield text[start:end]


def extract_first_object(text: str) -> Optional[Dict[str, Any]]:
    """First balanced JSON object in ``text``, tolerating prose and code fences."""
    if not isinstance(text, str):
        return None
    for candidate in _balanced_spans(text):
        try:
            value = json.loads(candidate)
        except (ValueError, RecursionError):
            continue
        if isinstance(value, dict):
            return value
    return None


def _require_object(text: str, what: str) -> Dict[str, Any]:
    obj = extract_first_object(text)
    if obj is None:
        raise ParseError(f"no parsable JSON object in {what} output")
    return obj


def parse_planner_output(text: str, m: int = 5) -> SubQueryPlan:
    """``{"searches": [{"reason": ..., "query": ...}, ...]}``, truncated to ``m`` entries."""
    obj = _require_object(text, "planner")
    searches = obj.get("searches")
    if not isinstance(searches, list) or not searches:
        raise ParseError("planner output has no 'searches' list")
    items = []
    for entry in searches:
        if not isinstance(entry, dict) or not isinstance(entry.get("query"), str):
            continue
        reason = entry.get("reason")
        try:
            items.append(SearchItem(reason=reason if isinstance(reason, str) else "", query=entry["query"]))
        except ValidationError:
            continue
        if len(items) == m:
            break
    if not items:
        raise ParseError("planner output has no usable searches")
    return SubQueryPlan(searches=items)


def parse_esc_fields(text: str) -> Tuple[str, Optional[str], str]:
    """(action, next_query, message) without enforcing the query requirement."""
    obj = _require_object(text, "controller")
    action = obj.get("action")
    if not isinstance(action, str) or action.strip().upper() not in ("CONTINUE", "STOP"):
        raise ParseError(f"controller action must be CONTINUE or STOP, got {action!r}")
    next_query = obj.get("next_query")
    if next_query is not None and not isinstance(next_query, str):
        raise ParseError("controller next_query must be a string")
    message = obj.get("message")
    if not isinstance(message, str):
        message = ""
    next_query = next_query.strip() if next_query else None
    return action.strip().upper(), next_query or None, message


def parse_esc_output(text: str) -> AgentDecision:
    """``{"action": "CONTINUE"|"STOP", "next_query": ..., "message": ...}`` (action case-insensitive)."""
    action, next_query, message = parse_esc_fields(text)
    if action == "STOP":
        return AgentDecision(action="STOP", message=message)
    if not next_query:
        raise ParseError("controller chose CONTINUE without a next_query")
    return AgentDecision(action="CONTINUE", next_query=next_query, message=message)


def parse_writer_output(text: str, hop_index: int = 1) -> StepResponse:
    """The ``answer`` field, or the raw text when no object parses."""
    text = text if isinstance(text, str) else ""
    obj = extract_first_object(text)
    if obj is not None and "answer" in obj:
        answer = obj["answer"]
        if not isinstance(answer, str):
            answer = json.dumps(answer, ensure_ascii=False)
        return StepResponse(text=answer.strip(), hop_index=hop_index)
    return StepResponse(text=text.strip(), hop_index=hop_index)


def parse_formulator_output(text: str) -> str:
    """The ``query`` field, else the first non-empty line."""
    obj = extract_first_object(text)
    if obj is not None and isinstance(obj.get("query"), str) and obj["query"].strip():
        return obj["query"].strip()
    for line in (text or "").splitlines():
        line = line.strip().strip('"').strip()
        if line and not line.startswith(("{", "}", "```")):
            return line
    raise ParseError("formulator produced no query")


def parse_judge_output(text: str) -> Optional[int]:
    """1 if the last Decision line contains 'yes', 0 otherwise; None when there is no Decision line."""
    matches = _DECISION_LINE.findall(text or "")
    if not matches:
        return None
    return 1 if "yes" in matches[-1].lower() else 0


def parse_rerank_score(text: str) -> float:
    """First number in the reply, clamped to [0, 10]; 0 when there is none."""
    match = _NUMBER.search(text or "")
    if match is None:
        return 0.0
    return min(10.0, max(0.0, float(match.group(0))))


def parse_ircot_step(text: str) -> Tuple[str, Optional[str]]:
    """(reasoning sentence, answer if the sentence carries the answer marker)."""
    sentence = " ".join((text or "").split())
    match = _ANSWER_MARKER.search(sentence)
    if match is None:
        return sentence, None
    answer = match.group(1).strip().rstrip(".").strip()
    return sentence, answer or None
