"""The offline model family: solver skills, rewriter, and judge."""

from __future__ import annotations

from decimal import Decimal

from numveil.answers import answers_match
from numveil.clients import CallLog, ChatRequest, Sampling
from numveil.fences import first_fenced_block
from numveil.prompts import (
    build_judge_messages,
    build_rewriter_messages,
    build_solver_messages,
)
from numveil.query import query_to_dict
from numveil.sandbox import ExecRequest, run_snippet
from numveil.simulate import (
    ALL_SKILLS,
    LOCAL_SKILLS,
    SimulatedModel,
    classify_question,
    demo_dataset,
)
from numveil.synthesis import parse_rewritten, serialize_query, validate_rewrite
from numveil.synthesis import SynthesizedQuery


def solve_with(model: SimulatedModel, query) -> Decimal | None:
    request = ChatRequest(
        messages=build_solver_messages(query.numbered_context(), query.question),
        sampling=Sampling(),
        max_tokens=512,
        role_tag="Local",
    )
    reply = model.chat(request).text
    block = first_fenced_block(reply)
    if block is None:
        return None
    result = run_snippet(ExecRequest(id="sim", code=block.body, timeout_ms=2000))
    return result.answer if result.ok else None


class TestQuestionKinds:
    def test_classification(self):
        assert classify_question("What is the growth rate of X from 2001 to 2002?") == "growth"
        assert classify_question("How much did X increase from 2001 to 2002?") == "increase"
        assert classify_question("What is the total of X for 1998 and 2003?") == "total"
        assert classify_question("What is the average of X across 1999 and 2002?") == "average"
        assert classify_question("What is the ratio of X in 2009 to X in 2005?") == "ratio"
        assert classify_question("Who chaired the meeting?") is None


class TestSolverSkills:
    def test_known_kinds_are_solved_exactly(self):
        model = SimulatedModel(ALL_SKILLS, CallLog(), name="sim")
        for query in demo_dataset(10):
            answer = solve_with(model, query)
            assert answer is not None, query.id
            assert answers_match(answer, query.gold_answer), query.id

    def test_missing_skill_produces_scattered_answers(self):
        model = SimulatedModel(LOCAL_SKILLS, CallLog(), name="sim")
        query = next(q for q in demo_dataset(10) if "average" in q.id)
        answers = {solve_with(model, query) for _ in range(7)}
        assert len(answers) == 7

    def test_in_skill_answers_repeat(self):
        model = SimulatedModel(LOCAL_SKILLS, CallLog(), name="sim")
        query = next(q for q in demo_dataset(10) if "total" in q.id)
        answers = {solve_with(model, query) for _ in range(5)}
        assert len(answers) == 1


class TestRewriter:
    def test_tagged_rewrite_validates_structurally(self):
        model = SimulatedModel(ALL_SKILLS, CallLog(), name="shifter")
        for query in demo_dataset(5):
            request = ChatRequest(
                messages=build_rewriter_messages(serialize_query(query), ()),
                sampling=Sampling(),
                max_tokens=1024,
                role_tag="Shifter",
            )
            reply = model.chat(request).text
            parsed = parse_rewritten(reply)
            assert parsed is not None, query.id
            candidate = SynthesizedQuery(
                sentences=parsed[0], question=parsed[1], attempts=1, shifter_id="s"
            )
            validation = validate_rewrite(query, candidate)
            assert validation.ok, (query.id, validation.violations)

    def test_rewrite_changes_topic_words(self):
        model = SimulatedModel(ALL_SKILLS, CallLog(), name="shifter")
        query = demo_dataset(1)[0]
        request = ChatRequest(
            messages=build_rewriter_messages(serialize_query(query), ()),
            sampling=Sampling(),
            max_tokens=1024,
            role_tag="Shifter",
        )
        sentences, _ = parse_rewritten(model.chat(request).text)
        assert "foundry" not in " ".join(sentences).lower()


class TestJudge:
    def judge_reply(self, context_a: str, context_b: str) -> str:
        model = SimulatedModel(ALL_SKILLS, CallLog(), name="judge")
        request = ChatRequest(
            messages=build_judge_messages(context_a, context_b),
            sampling=Sampling.greedy(),
            max_tokens=8,
            role_tag="Judge",
        )
        return model.chat(request).text

    def test_verbatim_overlap_is_a_yes(self):
        context = "The foundry group casting output for 2011 is 151 ."
        assert self.judge_reply(context, context).startswith("Yes")

    def test_disjoint_topics_are_a_no(self):
        reply = self.judge_reply(
            "The foundry group casting output for 2011 is 151 .",
            "Lantern brightness for the meadow survey in 2013 is 884 .",
        )
        assert reply.startswith("No")


class TestDemoDataset:
    def test_same_seed_is_identical(self):
        a = [query_to_dict(q) for q in demo_dataset(12, seed=3)]
        b = [query_to_dict(q) for q in demo_dataset(12, seed=3)]
        assert a == b

    def test_different_seeds_differ(self):
        a = [query_to_dict(q) for q in demo_dataset(12, seed=3)]
        b = [query_to_dict(q) for q in demo_dataset(12, seed=4)]
        assert a != b

    def test_kinds_cycle_and_ids_are_stable(self):
        queries = demo_dataset(5)
        assert [q.id for q in queries] == [
            "sim-growth-000",
            "sim-increase-001",
            "sim-total-002",
            "sim-average-003",
            "sim-ratio-004",
        ]

    def test_every_query_has_a_gold_answer(self):
        for query in demo_dataset(10):
            assert query.gold_answer is not None
            assert len(query.sentences) == 3
