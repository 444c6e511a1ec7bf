"""
Prompt templates for every agent role.

Templates live as versioned YAML assets under core/agents/prompts/ and use
``{placeholder}`` substitution. Only lowercase identifiers in braces are
placeholders, so the JSON examples inside the templates pass through intact.
"""

import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import yaml

from anchorchain.config import PROMPT_DIRECTORY
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import TemplateError
from anchorchain.retrieval.base import RankedList

logger = logging.getLogger(__name__)

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")

NO_PASSAGES = "(no passages retrieved)"
NO_REASONING = "(none yet)"


class RenderedPrompt(NamedTuple):
    system: str
    user: str
    name: str
    version: int


class PromptTemplate(NamedTuple):
    name: str
    version: int
    role: str
    system: str
    user: str

    def render(self, **values: object) -> RenderedPrompt:
        return RenderedPrompt(
            system=_substitute(self.system, values, self.name),
            user=_substitute(self.user, values, self.name),
            name=self.name,
            version=self.version,
        )


def _substitute(text: str, values: Dict[str, object], template_name: str) -> str:
    def replace(match: "re.Match[str]") -> str:
        key = match.group(1)
        if key not in values:
            raise TemplateError(f"template {template_name!r} needs a value for {{{key}}}")
        return str(values[key])

    return _PLACEHOLDER.sub(replace, text).strip()


@lru_cache(maxsize=None)
def load_template(name: str, directory: Path = PROMPT_DIRECTORY) -> PromptTemplate:
    path = Path(directory) / f"{name}.yaml"
    if not path.is_file():
        raise TemplateError(f"prompt template asset missing: {path}")
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    try:
        return PromptTemplate(
            name=data["name"],
            version=int(data.get("version", 1)),
            role=data["role"],
            system=data["system"],
            user=data["user"],
        )
    except KeyError as e:
        raise TemplateError(f"prompt template {path.name} lacks field {e}") from e


# --- Context rendering ---

class RenderedContext(NamedTuple):
    text: str
    chunk_ids: List[str]
    truncated: bool


def _passage(index: int, chunk_id: str, store: CorpusStore) -> str:
    chunk = store.get_chunk(chunk_id)
    return f"Passage {index} [{chunk_id}] {chunk.title}\n{chunk.text.strip()}"


def render_context(entries: Sequence[str], store: CorpusStore, char_cap: Optional[int] = None) -> RenderedContext:
    """
    Numbered passages with chunk-id headers, in context order. Passages that
    would push the text past ``char_cap`` are dropped from the end.
    """
    if not entries:
        return RenderedContext(NO_PASSAGES, [], False)
    blocks: List[str] = []
    kept: List[str] = []
    used = 0
    for chunk_id in entries:
        block = _passage(len(blocks) + 1, chunk_id, store)
        cost = len(block) + (2 if blocks else 0)
        if char_cap is not None and used + cost > char_cap:
            if not blocks:
                blocks.append(block[:char_cap])
                kept.append(chunk_id)
            break
        blocks.append(block)
        kept.append(chunk_id)
        used += cost
    return RenderedContext("\n\n".join(blocks), kept, len(kept) < len(entries))


def render_search_results(ranked: RankedList, store: CorpusStore) -> str:
    """The searcher contract: entries verbatim, in rank order, no commentary."""
    if not ranked.entries:
        return NO_PASSAGES
    blocks = []
    for chunk_id in ranked.chunk_ids:
        chunk = store.get_chunk(chunk_id)
        blocks.append(f"[{chunk_id}]\n{chunk.text}")
    return "\n\n".join(blocks)


# --- Per-role renderers ---

def render_planner_prompt(question: str, m: int = 5) -> RenderedPrompt:
    if not question.strip():
        raise ValueError("question must not be empty")
    return load_template("planner").render(question=question, m=m)


def render_writer_prompt(question: str, context: str) -> RenderedPrompt:
    return load_template("writer").render(question=question, context=context or NO_PASSAGES)


def render_esc_prompt(question: str, response: str, context: str, with_query: bool = True) -> RenderedPrompt:
    name = "esc" if with_query else "esc_decision"
    return load_template(name).render(question=question, response=response or "(empty)", context=context or NO_PASSAGES)


def render_formulator_prompt(question: str, response: str, esc_message: str) -> RenderedPrompt:
    return load_template("formulator").render(
        question=question, response=response or "(empty)", message=esc_message or "(not stated)"
    )


def render_judge_prompt(question: str, predicted: str, gold_answer: str) -> RenderedPrompt:
    return load_template("judge").render(query=question, response=predicted, answer=gold_answer)


def render_reranker_prompt(query: str, passage: str) -> RenderedPrompt:
    return load_template("reranker").render(query=query, passage=passage)


def render_baseline_prompt(name: str, question: str) -> RenderedPrompt:
    """``cot`` or ``direct``: no context at all."""
    return load_template(name).render(question=question)


def render_ircot_prompt(question: str, context: str, reasoning: Sequence[str]) -> RenderedPrompt:
    return load_template("ircot").render(
        question=question,
        context=context or NO_PASSAGES,
        reasoning=" ".join(reasoning) if reasoning else NO_REASONING,
    )
