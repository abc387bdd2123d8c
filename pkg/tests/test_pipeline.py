import json
import threading

import pytest

from asktmk.errors import EmptyQuestion, InvalidModel, ProviderUnavailable, StageError
from asktmk.pipeline import (
    Engine,
    QuestionClass,
    decompose_method,
    refusal_text,
    rule_classify,
)
from asktmk.providers import ProviderConfig, estimate_tokens
from asktmk.tmk import Kind, parse_model

WORKING_EXAMPLE = "How can I best utilise the output of the system in VERA?"


class FailingProvider:
    mode = "remote"

    def complete(self, request):
        raise ProviderUnavailable("endpoint down")


class CannedProvider:
    mode = "remote"

    def __init__(self, text):
        self.text = text
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return self.text


class TestClassify:
    def test_working_example_is_multimodels(self, engine):
        assert engine.classify(WORKING_EXAMPLE) is QuestionClass.MULTIMODELS

    def test_how_question_naming_a_method_is_mmodel(self, engine):
        assert engine.classify("How do you run simulation?") is QuestionClass.MMODEL

    def test_out_of_domain_is_cant_answer(self, engine):
        assert engine.classify("What is the capital of France?") is QuestionClass.CANT_ANSWER

    def test_empty_question(self, engine):
        with pytest.raises(EmptyQuestion):
            engine.classify("   ")

    def test_remote_provider_choice_is_used(self, engine, model):
        remote = Engine(model)
        remote.provider = CannedProvider("cant_answer")
        assert remote.classify("How do you run simulation?") is QuestionClass.CANT_ANSWER

    def test_unparseable_remote_output_falls_back_with_warning(self, model):
        remote = Engine(model)
        remote.provider = CannedProvider("no idea what this is")
        cls, warnings = remote._classify("How do you run simulation?")
        assert cls is QuestionClass.MMODEL
        assert warnings and "fallback" in warnings[0]

    def test_rule_classifier_concept_mention_is_multimodels(self, model):
        # a concept name alone must not trigger the mmodel route
        assert rule_classify("How do you do with Ecology Model?", model) \
            is QuestionClass.MULTIMODELS


class TestLocalize:
    def test_multimodels_searches_all_kinds(self, engine):
        hits = engine.localize(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, k=4)
        assert len(hits) == 4
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_mmodel_never_returns_knowledge(self, engine):
        hits = engine.localize("How do you run simulation?", QuestionClass.MMODEL, k=4)
        assert len(hits) == 4
        assert all(h.kind in (Kind.TASK, Kind.METHOD) for h in hits)

    def test_self_match_score_one(self, engine):
        docs = engine._corpora[frozenset({Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE})]
        doc = docs[0]
        hits = engine.localize(f"{doc.title}\n{doc.body}", QuestionClass.MULTIMODELS, k=1)
        assert (hits[0].element_id, hits[0].kind) == (doc.element_id, doc.kind)
        assert hits[0].score == pytest.approx(1.0, abs=1e-12)

    def test_localize_never_calls_the_provider(self, model):
        probe = Engine(model)
        probe.provider = CannedProvider("never")
        probe.localize(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, k=4)
        assert probe.provider.calls == 0


class TestDecomposeMethod:
    def test_linear_fsm(self, model):
        steps = decompose_method(model, "m-create-simulation")
        assert [s.state_name for s in steps] == [
            "Setting simulation parameters",
            "Compiling the agent-based simulation",
            "Simulation created",
        ]

    def test_branch_visits_ascending_label_first(self):
        raw = {
            "agent_name": "A", "version": "1",
            "tasks": [{"id": "t", "name": "T", "description": "d",
                       "by_methods": ["m"], "top_level": True}],
            "methods": [{
                "id": "m", "name": "M", "description": "d", "implements": "t",
                "states": [
                    {"id": "s1", "name": "start"},
                    {"id": "s2", "name": "failed", "terminal": True},
                    {"id": "s3", "name": "succeeded", "terminal": True},
                ],
                "transitions": [
                    {"from_state": "s1", "to_state": "s3", "condition_label": "ok"},
                    {"from_state": "s1", "to_state": "s2", "condition_label": "fail"},
                ],
                "start_state": "s1",
            }],
            "knowledge": [],
        }
        model = parse_model(json.dumps(raw))
        steps = decompose_method(model, "m")
        # "fail" sorts before "ok", so the failure branch is walked first
        assert [s.state_name for s in steps] == ["start", "failed", "succeeded"]
        assert steps[0].conditions == ("fail", "ok")

    def test_fixture_simulation_workflow_matches_hand_walk(self, model):
        steps = decompose_method(model, "m-simulation-workflow")
        assert [(s.state_name, s.subtask_name) for s in steps] == [
            ("Creating the simulation", "Create Simulation"),
            ("Running the simulation", "Run Simulation"),
            ("Simulation complete", None),
        ]

    def test_every_state_appears_exactly_once_despite_loop(self, model):
        steps = decompose_method(model, "m-run-simulation")
        names = [s.state_name for s in steps]
        assert len(names) == len(set(names)) == 3

    def test_unknown_method(self, model):
        from asktmk.errors import UnknownMethod

        with pytest.raises(UnknownMethod):
            decompose_method(model, "m-missing")


class TestGenerate:
    def test_four_hits_make_four_steps_mentioning_all_titles(self, engine):
        hits = engine.localize(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, k=4)
        result = engine.generate(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, hits)
        assert len(result.steps) == 4
        assert result.answer == result.steps[-1]
        for hit in hits:
            assert engine.document_for(hit).title in result.answer

    def test_single_document_corpus_yields_single_step(self):
        raw = {
            "agent_name": "Tiny", "version": "1",
            "tasks": [{"id": "t", "name": "Only Task", "description": "does the thing",
                       "top_level": True}],
            "methods": [], "knowledge": [],
        }
        tiny = Engine(parse_model(json.dumps(raw)))
        result = tiny.ask("How does Only Task work in Tiny?")
        assert len(result.hits) == 1
        assert len(result.steps) == 1
        assert result.answer == result.steps[0]

    def test_mmodel_prompt_carries_method_steps(self, engine):
        question = "How do you run simulation?"
        hits = engine.localize(question, QuestionClass.MMODEL, k=4)
        result = engine.generate(question, QuestionClass.MMODEL, hits)
        assert result.metadata["templates"][0] == "cot_method_prompt"
        assert len(result.steps) == len(hits)

    def test_provider_failure_preserves_partial_steps(self, model):
        flaky = Engine(model)
        calls = {"n": 0}
        real = flaky.provider.complete

        def fail_after_two(request):
            calls["n"] += 1
            if calls["n"] > 2:
                raise ProviderUnavailable("gone")
            return real(request)

        flaky.provider.complete = fail_after_two
        hits = flaky.localize(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, k=4)
        with pytest.raises(StageError) as exc:
            flaky.generate(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, hits)
        assert exc.value.stage == "generate"
        assert exc.value.code == "PROVIDER_UNAVAILABLE"
        assert len(exc.value.partial_steps) == 2


class TestAsk:
    def test_working_example_end_to_end(self, engine):
        result = engine.ask(WORKING_EXAMPLE)
        assert result.question_class is QuestionClass.MULTIMODELS
        assert len(result.hits) == 4
        assert result.answer
        assert result.metadata["k"] == 4
        assert result.metadata["provider_mode"] == "mock"

    def test_out_of_domain_short_circuits_without_provider_calls(self, model):
        probe = Engine(model)
        result = probe.ask("What is the capital of France?")
        assert result.question_class is QuestionClass.CANT_ANSWER
        assert result.hits == ()
        assert result.steps == ()
        assert result.answer == refusal_text("VERA")
        assert probe.provider.calls == 0

    def test_same_question_twice_in_one_session_is_identical(self, model):
        fresh = Engine(model)
        session = fresh.session("s1")
        first = fresh.ask(WORKING_EXAMPLE, session=session)
        second = fresh.ask(WORKING_EXAMPLE, session=session)
        assert first.question_class == second.question_class
        assert first.hits == second.hits
        assert first.answer == second.answer

    def test_hits_count_is_min_of_k_and_corpus(self, engine):
        result = engine.ask(WORKING_EXAMPLE, k=50)
        assert len(result.hits) == 15  # full multimodels corpus

    def test_session_history_is_bounded_and_summary_updates(self, model):
        capped = Engine(parse_model(open("fixtures/vera.tmk.json", "rb").read()),
                        session_bound=3)
        session = capped.session("chat")
        for i in range(5):
            capped.ask(f"What is VERA good for, attempt {i}?", session=session)
        assert len(session.history) == 3
        assert "attempt 4" in session.summary
        assert "attempt 0" not in session.summary

    def test_concurrent_asks_on_one_session_serialize(self, model):
        shared = Engine(model, session_bound=100)
        session = shared.session("busy")
        errors = []

        def worker(i):
            try:
                shared.ask(f"What does VERA show about population {i}?", session=session)
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(session.history) == 8

    def test_invalid_model_rejected_at_engine_construction(self, fixture_raw):
        fixture_raw["methods"][0]["transitions"][0]["to_state"] = "s-missing"
        with pytest.raises(InvalidModel) as exc:
            Engine(parse_model(json.dumps(fixture_raw)))
        assert "DANGLING_STATE" in exc.value.report.codes()

    def test_stage_attribution_on_classify_failure(self, model):
        broken = Engine(model)
        broken.provider = FailingProvider()
        with pytest.raises(StageError) as exc:
            broken.ask("How do you run simulation?")
        assert exc.value.stage == "classify"

    def test_token_budget_truncates_context_with_warning(self, model):
        from asktmk.prompts import render_prompt

        baseline = Engine(model)
        hits = baseline.localize(WORKING_EXAMPLE, QuestionClass.MULTIMODELS, k=1)
        doc = baseline.document_for(hits[0])
        software_qa = render_prompt(baseline.templates["software_qa_prompt"],
                                    {"agent_name": "VERA", "session_summary": ""})
        full_prompt = baseline._answer_prompt(WORKING_EXAMPLE, software_qa, doc, [])
        tight = Engine(model, provider_config=ProviderConfig(
            prompt_token_limit=estimate_tokens(full_prompt) - 5))
        result = tight.ask(WORKING_EXAMPLE, k=1)
        warnings = result.metadata["warnings"]
        assert any("truncated" in w for w in warnings)
        assert result.answer


class TestDeterminism:
    def test_mock_pipeline_is_a_pure_function_of_model_question_k(self, fixture_bytes):
        runs = []
        for _ in range(2):
            engine = Engine(parse_model(fixture_bytes))
            result = engine.ask(WORKING_EXAMPLE, k=4)
            runs.append(json.dumps(result.as_dict(), sort_keys=True).encode())
        assert runs[0] == runs[1]
