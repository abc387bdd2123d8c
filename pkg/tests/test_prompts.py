import pytest

from asktmk.errors import MissingBinding, UnknownBinding
from asktmk.prompts import (
    TEMPLATE_IDS,
    PromptTemplate,
    context_block,
    load_templates,
    render_prompt,
)
from asktmk.tmk import Document, Kind


@pytest.fixture(scope="module")
def templates():
    return load_templates()


def test_all_template_assets_load(templates):
    assert set(templates) == set(TEMPLATE_IDS)
    for template in templates.values():
        assert template.text


def test_placeholders_equal_required_bindings():
    t = PromptTemplate("demo", "Hello {name}, ask about {topic} or {name}.")
    assert t.required_bindings == {"name", "topic"}


def test_multi_models_desc_contains_all_three_lists(templates):
    rendered = render_prompt(templates["multi_models_desc"], {
        "Knowledge_names": "Ecology Model; VERA; User",
        "Task_names": "Finish an Ecology Experiment; Edit a Model",
        "Method_names": "create simulation; run simulation",
    })
    assert "Ecology Model; VERA; User" in rendered
    assert "Finish an Ecology Experiment; Edit a Model" in rendered
    assert "create simulation; run simulation" in rendered


def test_answer_prompt_embeds_question_verbatim(templates):
    question = "How can I best utilise the output of the system in VERA?"
    rendered = render_prompt(templates["multi_models_answer_prompt"], {
        "software_qa_prompt": "You are the assistant",
        "context_str": "CONTEXT:\n### T\nbody\nEND CONTEXT",
        "question": question,
    })
    assert question in rendered
    # the guideline sentence survives with the placeholder substituted
    assert f"Please treat each {question} as completely new" in rendered
    assert "{question}" not in rendered
    assert "{context_str}" not in rendered


def test_missing_binding(templates):
    with pytest.raises(MissingBinding) as exc:
        render_prompt(templates["multi_models_answer_prompt"], {
            "software_qa_prompt": "x", "context_str": "y",
        })
    assert exc.value.name == "question"


def test_unknown_binding(templates):
    with pytest.raises(UnknownBinding) as exc:
        render_prompt(templates["software_qa_prompt"], {
            "agent_name": "VERA", "session_summary": "", "extra": "nope",
        })
    assert exc.value.name == "extra"


def test_context_block_layout():
    docs = [
        Document("a", Kind.TASK, "Alpha", "First body. More."),
        Document("b", Kind.KNOWLEDGE, "Beta", "Second body."),
    ]
    block = context_block(docs)
    lines = block.splitlines()
    assert lines[0] == "CONTEXT:"
    assert lines[-1] == "END CONTEXT"
    assert "### Alpha" in lines
    assert "### Beta" in lines
