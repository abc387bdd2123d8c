"""Prompt templates with named-placeholder substitution.

Templates are versioned text assets shipped with the package. Placeholder
names are derived from the text itself, so the set of required bindings can
never drift from the template. Context passed to a completion provider is
wrapped in sentinel-delimited blocks (CONTEXT:, EXISTING_ANSWER:, QUESTION:)
that the mock provider knows how to parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from string import Formatter
from typing import Iterable, Mapping

from .errors import MissingBinding, UnknownBinding
from .tmk import Document

TEMPLATE_VERSION = "templates/v1"

TEMPLATE_IDS = (
    "multi_models_desc",
    "mmodel_desc",
    "cant_answer_desc",
    "multi_models_answer_prompt",
    "refine_prompt",
    "cot_method_prompt",
    "software_qa_prompt",
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    required_bindings: frozenset[str] = field(init=False)

    def __post_init__(self):
        names = set()
        for _, name, _, _ in Formatter().parse(self.text):
            if name == "":
                raise ValueError(f"template '{self.id}' uses a positional placeholder")
            if name is not None:
                names.add(name)
        object.__setattr__(self, "required_bindings", frozenset(names))


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder; the result contains no brace placeholder.

    Raises MissingBinding / UnknownBinding when the binding map and the
    template's placeholder set disagree.
    """
    for name in sorted(template.required_bindings):
        if name not in bindings:
            raise MissingBinding(name)
    for name in sorted(bindings):
        if name not in template.required_bindings:
            raise UnknownBinding(name)
    return template.text.format(**bindings)


def _load_asset(template_id: str) -> str:
    ref = resources.files("asktmk").joinpath(f"templates/{template_id}.txt")
    return ref.read_text(encoding="utf-8")


def load_templates() -> dict[str, PromptTemplate]:
    """Load every shipped template asset, keyed by template id."""
    return {tid: PromptTemplate(tid, _load_asset(tid)) for tid in TEMPLATE_IDS}


# --- sentinel blocks -----------------------------------------------------------


def context_block(documents: Iterable[Document]) -> str:
    """Render documents as the CONTEXT block the mock provider can parse."""
    parts = ["CONTEXT:"]
    for doc in documents:
        parts.append(f"### {doc.title}")
        parts.append(doc.body)
    parts.append("END CONTEXT")
    return "\n".join(parts)
