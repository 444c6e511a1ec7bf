"""
The two-stage control loop and its comparison variants.

Stage 1 (coverage anchor) plans sub-queries and merges their retrievals into
an anchored context. Stage 2 (iterative chain) alternates step answers with
evidence-sufficiency decisions, retrieving again only on CONTINUE.
"""

import logging
from typing import List, Optional, Tuple

from anchorchain.config import PipelineConfig
from anchorchain.core.backends import CompletionBackend, RecordingBackend
from anchorchain.core.logger import log_agent_action, log_decision
from anchorchain.core.models import (
    AgentDecision,
    CompletionRequest,
    Decoding,
    RoleTag,
    StepResponse,
    SubQueryPlan,
)
from anchorchain.core.parsers import (
    parse_esc_fields,
    parse_esc_output,
    parse_formulator_output,
    parse_ircot_step,
    parse_planner_output,
    parse_writer_output,
)
from anchorchain.core.prompts import (
    RenderedContext,
    RenderedPrompt,
    render_baseline_prompt,
    render_context,
    render_esc_prompt,
    render_formulator_prompt,
    render_ircot_prompt,
    render_planner_prompt,
    render_writer_prompt,
)
from anchorchain.core.trace import (
    FLAG_CONTEXT_TRUNCATED,
    FLAG_PLANNER_FALLBACK,
    FLAG_RERANK_FALLBACK,
    HopRecord,
    RunTrace,
    StopReason,
)
from anchorchain.corpus.store import CorpusStore
from anchorchain.errors import AnchorChainError, ParseError, ReplayMismatchError, RerankError
from anchorchain.retrieval.base import EvidenceContext, RankedList, merge_dedup
from anchorchain.retrieval.rerank import candidate_fallback
from anchorchain.retrieval.retriever import Retriever

logger = logging.getLogger(__name__)

RETRY_NOTE = (
    "\n\nYour previous reply could not be parsed. "
    "Reply with the JSON object only, exactly in the requested format."
)
SINGLE_PASS_MESSAGE = "single pass: no sufficiency control"


class QuerySession:
    """Mutable state of one query's execution; becomes a RunTrace at the end."""

    def __init__(self, qid: str, question: str, backend: CompletionBackend):
        self.qid = qid
        self.question = question
        self.backend = RecordingBackend(backend)
        self.plan: Optional[SubQueryPlan] = None
        self.anchor_retrievals: List[RankedList] = []
        self.anchor_entries: List[str] = []
        self.hops: List[HopRecord] = []
        self.errors: List[str] = []
        self.flags: List[str] = []

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def error(self, message: str) -> None:
        logger.warning(f"[{self.qid}] {message}")
        self.errors.append(message)

    def to_trace(self, variant: str, stop_reason: StopReason) -> RunTrace:
        return RunTrace(
            qid=self.qid,
            question=self.question,
            variant=variant,
            plan=self.plan,
            anchor_retrievals=self.anchor_retrievals,
            anchor_entries=self.anchor_entries,
            hops=self.hops,
            final_answer=self.hops[-1].response.text if self.hops else "",
            stop_reason=stop_reason,
            errors=self.errors,
            flags=self.flags,
            completion_transcript=self.backend.transcript,
        )


class Pipeline:
    """
    Runs one configured variant over single questions. Shared, read-only state
    (store, retriever, backend) may serve many concurrent queries; everything
    per-query lives in a QuerySession.
    """

    def __init__(
        self,
        store: CorpusStore,
        retriever: Retriever,
        backend: CompletionBackend,
        config: Optional[PipelineConfig] = None,
        agent_model: str = "scripted",
        controller_model: str = "scripted",
        decoding: Optional[Decoding] = None,
        generation_model: Optional[str] = None,
    ):
        self.store = store
        self.retriever = retriever
        self.backend = backend
        self.config = config or PipelineConfig()
        self.agent_model = agent_model
        self.controller_model = controller_model
        # answer-writing calls; the reasoning agents keep agent_model
        self.generation_model = generation_model or agent_model
        self.decoding = decoding or Decoding()

    def with_backend(self, backend: CompletionBackend) -> "Pipeline":
        return Pipeline(
            self.store, self.retriever, backend, self.config,
            self.agent_model, self.controller_model, self.decoding, self.generation_model,
        )

    def with_config(self, config: PipelineConfig) -> "Pipeline":
        return Pipeline(
            self.store, self.retriever, self.backend, config,
            self.agent_model, self.controller_model, self.decoding, self.generation_model,
        )

    # --- Backend plumbing ---

    def _request(self, session: QuerySession, role: RoleTag, prompt: RenderedPrompt, model: str) -> CompletionRequest:
        return CompletionRequest(
            role_tag=role,
            system_prompt=prompt.system,
            user_prompt=prompt.user,
            model_id=model,
            decoding=self.decoding,
            prompt_name=prompt.name,
            metadata={"qid": session.qid},
        )

    async def _call(self, session: QuerySession, role: RoleTag, prompt: RenderedPrompt, model: str) -> str:
        result = await session.backend.complete(self._request(session, role, prompt, model))
        return result.text

    async def _call_parsed(self, session, role, prompt, model, parse):
        """Call, parse, and on ParseError retry once with a format reminder."""
        text = await self._call(session, role, prompt, model)
        try:
            return parse(text)
        except ParseError as first:
            logger.info(f"[{session.qid}] {role} output unparsable ({first}); retrying once")
        retry = prompt._replace(user=prompt.user + RETRY_NOTE)
        return parse(await self._call(session, role, retry, model))

    def _render(self, session: QuerySession, entries: List[str]) -> RenderedContext:
        rendered = render_context(entries, self.store, self.config.context_char_cap)
        if rendered.truncated:
            session.flag(FLAG_CONTEXT_TRUNCATED)
        return rendered

    async def _retrieve(self, session: QuerySession, query: str) -> RankedList:
        cfg = self.config.retrieval
        try:
            return await self.retriever.retrieve(query, cfg, backend=session.backend)
        except RerankError as e:
            session.error(f"rerank failed for {query!r}: {e}; using candidate order")
            session.flag(FLAG_RERANK_FALLBACK)
            return candidate_fallback(e.candidates, cfg.final_k, query)

    # --- Agents ---

    async def _plan(self, session: QuerySession) -> SubQueryPlan:
        m = self.config.m
        prompt = render_planner_prompt(session.question, m=m)
        try:
            plan = await self._call_parsed(
                session, "planner", prompt, self.agent_model, lambda t: parse_planner_output(t, m)
            )
        except ParseError as e:
            session.error(f"planner output unparsable after retry: {e}")
            session.flag(FLAG_PLANNER_FALLBACK)
            log_agent_action("planner", "fallback", "Falling back to the original question",
                             {"qid": session.qid})
            return SubQueryPlan.single(session.question)
        log_agent_action("planner", "plan", f"{len(plan.searches)} sub-queries",
                         {"qid": session.qid, "queries": plan.queries})
        return plan

    async def _write(self, session: QuerySession, rendered: RenderedContext, hop: int) -> StepResponse:
        prompt = render_writer_prompt(session.question, rendered.text)
        text = await self._call(session, "writer", prompt, self.generation_model)
        return parse_writer_output(text, hop_index=hop)

    async def _decide(
        self, session: QuerySession, response: StepResponse, rendered: RenderedContext, hop: int
    ) -> Tuple[AgentDecision, bool]:
        """The controller's decision and whether it is the parse-failure fallback."""
        question = session.question
        try:
            if not self.config.separate_formulator:
                prompt = render_esc_prompt(question, response.text, rendered.text)
                decision = await self._call_parsed(session, "esc", prompt, self.controller_model, parse_esc_output)
            else:
                prompt = render_esc_prompt(question, response.text, rendered.text, with_query=False)
                action, _, message = await self._call_parsed(
                    session, "esc", prompt, self.controller_model, parse_esc_fields
                )
                if action == "STOP":
                    decision = AgentDecision(action="STOP", message=message)
                else:
                    fprompt = render_formulator_prompt(question, response.text, message)
                    query = await self._call_parsed(
                        session, "formulator", fprompt, self.agent_model, parse_formulator_output
                    )
                    decision = AgentDecision(action="CONTINUE", next_query=query, message=message)
        except ParseError as e:
            session.error(f"controller output unparsable at hop {hop} after retry: {e}")
            log_agent_action("esc", "fallback", "Unparsable decision treated as STOP",
                             {"qid": session.qid, "hop": hop}, level=logging.WARNING)
            return AgentDecision(action="STOP", message=f"fallback stop: {e}"), True
        log_decision(session.qid, hop, decision.action, decision.next_query, decision.message)
        return decision, False

    # --- Stages ---

    async def coverage_anchor(self, session: QuerySession) -> Tuple[SubQueryPlan, EvidenceContext]:
        """Plan sub-queries, retrieve each, merge into the anchored context in plan order."""
        plan = await self._plan(session)
        session.plan = plan
        ctx = EvidenceContext()
        for i, query in enumerate(plan.queries):
            ranked = await self._retrieve(session, query)
            session.anchor_retrievals.append(ranked)
            ctx = merge_dedup(ctx, ranked, "anchor", i, query)
        session.anchor_entries = list(ctx.entries)
        return plan, ctx

    async def iterative_chain(self, session: QuerySession, ctx: EvidenceContext) -> Tuple[str, StopReason]:
        """Write, decide, retrieve on CONTINUE; at most H hops. Returns (answer, stop reason)."""
        stop_reason: StopReason = "budget_exhausted"
        for hop in range(1, self.config.H + 1):
            rendered = self._render(session, ctx.entries)
            response = await self._write(session, rendered, hop)
            decision, fallback = await self._decide(session, response, rendered, hop)
            if decision.action == "STOP":
                session.hops.append(HopRecord(
                    hop_index=hop, response=response, decision=decision,
                    context_size_after=len(ctx), context_truncated=rendered.truncated,
                ))
                stop_reason = "error_fallback" if fallback else "esc_stop"
                break
            retrieved = await self._retrieve(session, decision.next_query)
            ctx = merge_dedup(ctx, retrieved, "hop", hop, decision.next_query)
            session.hops.append(HopRecord(
                hop_index=hop, response=response, decision=decision, retrieved=retrieved,
                context_size_after=len(ctx), context_truncated=rendered.truncated,
            ))
        return session.hops[-1].response.text, stop_reason

    async def _single_pass(self, session: QuerySession, ctx: EvidenceContext) -> StopReason:
        rendered = self._render(session, ctx.entries)
        response = await self._write(session, rendered, 1)
        session.hops.append(HopRecord(
            hop_index=1, response=response,
            decision=AgentDecision(action="STOP", message=SINGLE_PASS_MESSAGE),
            context_size_after=len(ctx), context_truncated=rendered.truncated,
        ))
        return "single_pass"

    async def _no_retrieval(self, session: QuerySession, template: str) -> StopReason:
        prompt = render_baseline_prompt(template, session.question)
        text = await self._call(session, "writer", prompt, self.generation_model)
        session.hops.append(HopRecord(
            hop_index=1, response=parse_writer_output(text, hop_index=1),
            decision=AgentDecision(action="STOP", message=SINGLE_PASS_MESSAGE),
            context_size_after=0,
        ))
        return "single_pass"

    async def _question_context(self, session: QuerySession) -> EvidenceContext:
        """C_start = retrieve(q), recorded as the anchor of non-planning variants."""
        ranked = await self._retrieve(session, session.question)
        session.anchor_retrievals.append(ranked)
        ctx = merge_dedup(EvidenceContext(), ranked, "anchor", 0, session.question)
        session.anchor_entries = list(ctx.entries)
        return ctx

    async def _interleaved(self, session: QuerySession) -> StopReason:
        """One reasoning sentence per hop, each used as the next retrieval query."""
        ctx = await self._question_context(session)
        reasoning: List[str] = []
        for hop in range(1, self.config.H + 1):
            rendered = self._render(session, ctx.entries)
            prompt = render_ircot_prompt(session.question, rendered.text, reasoning)
            sentence, answer = parse_ircot_step(await self._call(session, "writer", prompt, self.generation_model))
            if answer is not None or not sentence:
                if not sentence:
                    session.error(f"empty reasoning step at hop {hop}")
                session.hops.append(HopRecord(
                    hop_index=hop,
                    response=StepResponse(text=answer or "", hop_index=hop),
                    decision=AgentDecision(action="STOP", message=sentence),
                    context_size_after=len(ctx), context_truncated=rendered.truncated,
                ))
                return "esc_stop" if sentence else "error_fallback"
            reasoning.append(sentence)
            retrieved = await self._retrieve(session, sentence)
            ctx = merge_dedup(ctx, retrieved, "hop", hop, sentence)
            session.hops.append(HopRecord(
                hop_index=hop,
                response=StepResponse(text=sentence, hop_index=hop),
                decision=AgentDecision(action="CONTINUE", next_query=sentence, message=sentence),
                retrieved=retrieved,
                context_size_after=len(ctx), context_truncated=rendered.truncated,
            ))
        return "budget_exhausted"

    # --- Entry point ---

    async def run_query(self, qid: str, question: str) -> RunTrace:
        """Execute the configured variant on one question. Errors end up in the trace; replay divergence propagates."""
        variant = self.config.variant
        session = QuerySession(qid, question, self.backend)
        try:
            if variant == "par2rag":
                _, ctx = await self.coverage_anchor(session)
                _, stop_reason = await self.iterative_chain(session, ctx)
            elif variant == "coverage_anchor_only":
                _, ctx = await self.coverage_anchor(session)
                stop_reason = await self._single_pass(session, ctx)
            elif variant == "iterative_chain_only":
                ctx = await self._question_context(session)
                _, stop_reason = await self.iterative_chain(session, ctx)
            elif variant == "single_shot":
                ctx = await self._question_context(session)
                stop_reason = await self._single_pass(session, ctx)
            elif variant == "interleaved_ircot_style":
                stop_reason = await self._interleaved(session)
            elif variant == "cot_no_retrieval":
                stop_reason = await self._no_retrieval(session, "cot")
            else:
                stop_reason = await self._no_retrieval(session, "direct")
        except ReplayMismatchError:
            raise
        except AnchorChainError as e:
            session.error(f"query aborted: {type(e).__name__}: {e}")
            log_agent_action("writer", "abort", str(e), {"qid": qid}, level=logging.ERROR)
            stop_reason = "aborted"
        return session.to_trace(variant, stop_reason)
