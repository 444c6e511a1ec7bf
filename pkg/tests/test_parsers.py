"""
Tests for agent output parsers and prompt rendering
"""

import pytest

from anchorchain.core.parsers import (
    extract_first_object,
    parse_esc_output,
    parse_formulator_output,
    parse_ircot_step,
    parse_judge_output,
    parse_planner_output,
    parse_rerank_score,
    parse_writer_output,
)
from anchorchain.core.prompts import (
    NO_PASSAGES,
    load_template,
    render_context,
    render_judge_prompt,
    render_planner_prompt,
    render_search_results,
)
from anchorchain.errors import ParseError, TemplateError
from anchorchain.retrieval.base import RankedList

# Malformed or adversarial model outputs; every parser must either return or raise ParseError
FUZZ_CORPUS = [
    "",
    " ",
    "\n\n",
    "null",
    "[]",
    "[1, 2, 3]",
    "{}",
    "{",
    "}",
    "{{}}",
    "{\"searches\": }",
    "{\"searches\": null}",
    "{\"searches\": []}",
    "{\"searches\": [1, 2]}",
    "{\"searches\": [{\"reason\": 3}]}",
    "{\"searches\": [{\"query\": \"   \"}]}",
    "{\"searches\": \"not a list\"}",
    "{\"action\": \"MAYBE\"}",
    "{\"action\": 7}",
    "{\"action\": null, \"next_query\": \"x\"}",
    "{\"action\": \"CONTINUE\"}",
    "{\"action\": \"CONTINUE\", \"next_query\": \"\"}",
    "{\"action\": \"CONTINUE\", \"next_query\": 42}",
    "{\"action\": \"CONTINUE\", \"next_query\": [\"a\"]}",
    "{\"answer\": null}",
    "{\"answer\": {\"nested\": true}}",
    "{\"answer\": [1, 2]}",
    "```json\n{\"action\": \"STOP\"\n```",
    "```\n{\"searches\": [{\"query\": \"a\"}]\n```",
    "Sure! Here is the JSON: {\"action\": \"STOP\", \"message\": \"done\"",
    "{'action': 'STOP'}",
    "{\"action\": \"STOP\", \"next_query\": \"should be ignored\"}",
    "{\"a\": \"}\"}",
    "{\"a\": \"\\\"\"}",
    "{\"a\": \"\\",
    "\"just a string\"",
    "42",
    "-1e309",
    "NaN",
    "{\"searches\": [{\"query\": \"ok\"}], \"extra\": " + "[" * 50 + "]" * 50 + "}",
    "{" * 200,
    "}" * 200,
    "[" * 2000 + "]" * 2000,
    "{\"x\": " + "{\"y\": " * 1100 + "1" + "}" * 1100 + "}",
    "\x00\x01\x02",
    "퟿ unicode ☃ {\"action\": \"stop\"}",
    "Decision: yes",
    "Explanation: nope",
    "{\"query\": null}",
    "<html><body>{\"searches\": [{\"query\": \"x\"}]}</body></html>",
]

PARSERS = [
    lambda t: parse_planner_output(t, 5),
    parse_esc_output,
    parse_writer_output,
    parse_formulator_output,
    parse_judge_output,
    parse_rerank_score,
    parse_ircot_step,
]


class TestFuzz:

    def test_corpus_size(self):
        assert len(FUZZ_CORPUS) == 50

    @pytest.mark.parametrize("text", FUZZ_CORPUS)
    def test_only_declared_errors(self, text):
        for parse in PARSERS:
            try:
                parse(text)
            except ParseError:
                pass

    def test_brace_heavy_output(self):
        decision = '{"action": "STOP", "message": "done"}'
        assert extract_first_object("{" * 50000 + decision) == {"action": "STOP", "message": "done"}
        assert extract_first_object("{" * 50000) is None
        assert extract_first_object('He said "wait" {"a": "}"} then "{"') == {"a": "}"}

    def test_non_string_input(self):
        assert extract_first_object(None) is None
        with pytest.raises(ParseError):
            parse_planner_output(None)


class TestPlanner:

    def test_parses_searches(self):
        text = '{"searches": [{"reason": "r1", "query": "alpha"}, {"reason": "r2", "query": "beta"}]}'
        plan = parse_planner_output(text)
        assert plan.queries == ["alpha", "beta"]
        assert plan.searches[0].reason == "r1"

    def test_truncates_to_m(self):
        searches = ",".join(f'{{"query": "q{i}"}}' for i in range(8))
        plan = parse_planner_output(f'{{"searches": [{searches}]}}', m=3)
        assert plan.queries == ["q0", "q1", "q2"]

    def test_tolerates_prose_and_fences(self):
        text = 'Here you go:\n```json\n{"searches": [{"reason": "x", "query": "  padded  "}]}\n```'
        assert parse_planner_output(text).queries == ["padded"]

    def test_skips_unusable_entries(self):
        text = '{"searches": [{"query": ""}, "junk", {"query": "kept"}]}'
        assert parse_planner_output(text).queries == ["kept"]

    def test_no_searches(self):
        with pytest.raises(ParseError):
            parse_planner_output('{"searches": []}')


class TestController:

    def test_continue(self):
        decision = parse_esc_output('{"action": "continue", "next_query": "bridge", "message": "need more"}')
        assert decision.action == "CONTINUE"
        assert decision.next_query == "bridge"
        assert decision.message == "need more"

    def test_stop_drops_query(self):
        decision = parse_esc_output('{"action": "STOP", "next_query": "ignored"}')
        assert decision.action == "STOP"
        assert decision.next_query is None

    def test_continue_without_query(self):
        with pytest.raises(ParseError):
            parse_esc_output('{"action": "CONTINUE", "message": "?"}')

    def test_unknown_action(self):
        with pytest.raises(ParseError):
            parse_esc_output('{"action": "PAUSE"}')


class TestOtherRoles:

    def test_writer_json_and_raw(self):
        assert parse_writer_output('{"answer": " Mira Tal "}', hop_index=2).text == "Mira Tal"
        assert parse_writer_output("plain text answer").text == "plain text answer"
        assert parse_writer_output('{"answer": 1912}').text == "1912"

    def test_formulator(self):
        assert parse_formulator_output('{"query": "port founder"}') == "port founder"
        assert parse_formulator_output('"port founder"\n') == "port founder"
        with pytest.raises(ParseError):
            parse_formulator_output("```\n```")

    def test_judge(self):
        assert parse_judge_output("Explanation: match.\nDecision: yes") == 1
        assert parse_judge_output("Explanation: no match.\nDecision: No") == 0
        assert parse_judge_output("**Decision**: YES") == 1
        assert parse_judge_output("I think it is right.") is None

    def test_rerank_score_clamped(self):
        assert parse_rerank_score("7") == 7.0
        assert parse_rerank_score("relevance 12/10") == 10.0
        assert parse_rerank_score("-3") == 0.0
        assert parse_rerank_score("none") == 0.0

    def test_ircot_marker(self):
        assert parse_ircot_step("The port was founded by Tal.") == ("The port was founded by Tal.", None)
        sentence, answer = parse_ircot_step("So the answer is: Mira Tal.")
        assert answer == "Mira Tal"


class TestPrompts:

    def test_planner_prompt_carries_budget(self):
        prompt = render_planner_prompt("Who founded the port?", m=3)
        assert "Output 3 terms to query for." in prompt.system
        assert '"searches": [' in prompt.system
        assert prompt.user == "Query: Who founded the port?"

    def test_judge_prompt_format(self):
        prompt = render_judge_prompt("q?", "pred", "gold")
        assert "Predicted Answer: pred" in prompt.user
        assert "Decision: <yes|no>" in prompt.user

    def test_missing_template(self):
        with pytest.raises(TemplateError):
            load_template("no_such_prompt")

    def test_placeholder_values_are_not_rescanned(self):
        prompt = render_planner_prompt("What is {m}?", m=2)
        assert prompt.user == "Query: What is {m}?"

    @pytest.mark.asyncio
    async def test_context_rendering_and_cap(self, tiny_store):
        rendered = render_context(["river#0", "city#0"], tiny_store)
        assert rendered.text.startswith("Passage 1 [river#0] Alpha river\n")
        assert "Passage 2 [city#0] Bay city" in rendered.text
        assert not rendered.truncated

        first_len = len(render_context(["river#0"], tiny_store).text)
        capped = render_context(["river#0", "city#0"], tiny_store, char_cap=first_len + 5)
        assert capped.chunk_ids == ["river#0"]
        assert capped.truncated

        assert render_context([], tiny_store).text == NO_PASSAGES

    @pytest.mark.asyncio
    async def test_search_results_rendering(self, tiny_store):
        ranked = RankedList(query="bay", entries=[("city#0", 2.0), ("river#0", 1.0)])
        text = render_search_results(ranked, tiny_store)
        assert text.index("[city#0]") < text.index("[river#0]")
