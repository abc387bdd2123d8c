import json
import random

import pytest

from asktmk.errors import EmptyKindSet, MalformedInput, SchemaViolation
from asktmk.tmk import (
    Kind,
    parse_model,
    render_documents,
    serialize,
    validate,
    validate_source,
)

from .mutations import MUTATIONS, mutate


class TestParse:
    def test_fixture_parses_with_one_top_level_task(self, fixture_bytes):
        model = parse_model(fixture_bytes)
        assert model.agent_name == "VERA"
        top = [t for t in model.tasks if t.top_level]
        assert len(top) == 1
        assert top[0].name == "Finish an Ecology Experiment"
        subtask_names = [model.task_by_id(s).name for s in top[0].subtasks]
        assert subtask_names == ["Edit a Model", "Finish a Simulation"]

    def test_not_json_raises_malformed_input(self):
        with pytest.raises(MalformedInput):
            parse_model(b"{not json")

    def test_not_utf8_raises_malformed_input(self):
        with pytest.raises(MalformedInput):
            parse_model(b"\xff\xfe{}")

    def test_zero_tasks_is_schema_violation(self):
        doc = {"agent_name": "A", "version": "1", "tasks": [], "methods": [], "knowledge": []}
        with pytest.raises(SchemaViolation) as exc:
            parse_model(json.dumps(doc))
        assert exc.value.code == "NO_TASKS"

    def test_duplicate_task_id_names_the_id(self, fixture_raw):
        fixture_raw["tasks"][1]["id"] = "t1"
        fixture_raw["tasks"][2]["id"] = "t1"
        with pytest.raises(SchemaViolation) as exc:
            parse_model(json.dumps(fixture_raw))
        assert exc.value.code == "DUPLICATE_ID"
        assert "t1" in exc.value.detail

    def test_missing_field(self, fixture_raw):
        del fixture_raw["tasks"][0]["name"]
        with pytest.raises(SchemaViolation) as exc:
            parse_model(json.dumps(fixture_raw))
        assert exc.value.code == "MISSING_FIELD"

    def test_wrong_type(self, fixture_raw):
        fixture_raw["tasks"][0]["top_level"] = "yes"
        with pytest.raises(SchemaViolation) as exc:
            parse_model(json.dumps(fixture_raw))
        assert exc.value.code == "WRONG_TYPE"

    def test_unknown_field(self, fixture_raw):
        fixture_raw["tasks"][0]["urgency"] = 9
        with pytest.raises(SchemaViolation) as exc:
            parse_model(json.dumps(fixture_raw))
        assert exc.value.code == "UNKNOWN_FIELD"

    def test_roundtrip_parse_serialize(self, model):
        assert parse_model(serialize(model)) == model

    def test_fixture_matches_shipped_schema(self, fixture_raw, fixture_path):
        jsonschema = pytest.importorskip("jsonschema")
        schema = json.loads(
            (fixture_path.parent.parent / "schemas" / "tmk-model.schema.json").read_text())
        jsonschema.validate(fixture_raw, schema)

    def test_packaged_model_copy_is_identical(self, fixture_bytes):
        from asktmk.config import bundled_model_path

        assert bundled_model_path().read_bytes() == fixture_bytes


class TestValidate:
    def test_fixture_is_valid(self, model):
        report = validate(model)
        assert report.ok
        assert report.errors == ()

    @pytest.mark.parametrize("code", sorted(MUTATIONS))
    def test_each_mutation_yields_exactly_its_code(self, fixture_raw, code):
        mutated = mutate(fixture_raw, MUTATIONS[code])
        report = validate_source(json.dumps(mutated))
        assert not report.ok
        assert report.codes() == [code]

    def test_dangling_state_points_at_the_transition(self, fixture_raw):
        mutated = mutate(fixture_raw, MUTATIONS["DANGLING_STATE"])
        report = validate_source(json.dumps(mutated))
        issue = report.errors[0]
        assert "s-missing" in issue.message
        assert "m-experiment-workflow" in issue.path

    def test_terminal_with_outgoing(self, fixture_raw):
        fixture_raw["methods"][0]["transitions"].append({
            "from_state": "s-exp-done", "to_state": "s-exp-edit",
            "condition_label": "restart"})
        report = validate_source(json.dumps(fixture_raw))
        assert report.codes() == ["TERMINAL_WITH_OUTGOING"]

    def test_empty_condition_label(self, fixture_raw):
        fixture_raw["methods"][1]["transitions"][0]["condition_label"] = "  "
        report = validate_source(json.dumps(fixture_raw))
        assert report.codes() == ["EMPTY_CONDITION_LABEL"]

    def test_top_level_count(self, fixture_raw):
        fixture_raw["tasks"][1]["top_level"] = True
        report = validate_source(json.dumps(fixture_raw))
        assert report.codes() == ["TOP_LEVEL_COUNT"]

    def test_subtasks_without_method(self, fixture_raw):
        fixture_raw["tasks"][2]["by_methods"] = []
        report = validate_source(json.dumps(fixture_raw))
        # the orphaned method still points at the task, hence the mismatch is gone;
        # only the missing-method invariant fires
        assert "MISSING_METHOD" in report.codes()

    def test_method_task_mismatch(self, fixture_raw):
        fixture_raw["methods"][2]["implements"] = "t-run-simulation"
        report = validate_source(json.dumps(fixture_raw))
        assert "METHOD_TASK_MISMATCH" in report.codes()

    def test_report_independent_of_element_order(self, fixture_raw):
        broken = mutate(fixture_raw, MUTATIONS["DANGLING_STATE"])
        broken["tasks"][1]["givens"][0] = "c-missing"
        baseline = validate_source(json.dumps(broken))

        rng = random.Random(7)
        for _ in range(5):
            shuffled = json.loads(json.dumps(broken))
            rng.shuffle(shuffled["tasks"])
            rng.shuffle(shuffled["methods"])
            rng.shuffle(shuffled["knowledge"])
            for method in shuffled["methods"]:
                rng.shuffle(method["transitions"])
            assert validate_source(json.dumps(shuffled)) == baseline


class TestRenderDocuments:
    def test_fixture_yields_one_document_per_element(self, fixture_raw, model):
        # oracle: count elements of the authored fixture directly
        expected = (len(fixture_raw["tasks"]) + len(fixture_raw["methods"])
                    + len(fixture_raw["knowledge"]))
        assert expected == 15
        docs = render_documents(model, {Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE})
        assert len(docs) == expected

    def test_task_method_selection_excludes_knowledge(self, model):
        docs = render_documents(model, {Kind.TASK, Kind.METHOD})
        assert len(docs) == len(model.tasks) + len(model.methods)
        assert all(d.kind in (Kind.TASK, Kind.METHOD) for d in docs)

    def test_empty_kind_set(self, model):
        with pytest.raises(EmptyKindSet):
            render_documents(model, set())

    def test_output_is_deterministic_and_ordered(self, model):
        docs1 = render_documents(model, {Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE})
        docs2 = render_documents(model, {Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE})
        assert docs1 == docs2
        kinds = [d.kind for d in docs1]
        assert kinds == sorted(kinds, key=[Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE].index)
        for kind in Kind:
            ids = [d.element_id for d in docs1 if d.kind is kind]
            assert ids == sorted(ids)

    def test_bodies_are_non_empty_and_keys_unique(self, model):
        docs = render_documents(model, {Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE})
        assert all(d.body for d in docs)
        keys = [d.key for d in docs]
        assert len(set(keys)) == len(keys)
