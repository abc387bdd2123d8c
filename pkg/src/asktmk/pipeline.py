"""The three-stage question pipeline: classify, localize, generate.

Stage 1 sorts a question into mmodel (step-by-step "how" questions),
multimodels (everything else the self-model covers), or cant_answer.
Stage 2 retrieves the most relevant model elements: task and method
documents only for mmodel, all three kinds for multimodels. Stage 3 builds
the answer as a refine chain: an initial answer grounded in the top
document, then one refinement per remaining document in descending score
order, with method FSMs unrolled into the prompt for mmodel questions.

Stage purity: classify never touches the index, localize never calls the
completion provider. With the mock provider and the hashing embedder the
whole pipeline is a deterministic function of (model, question, k).
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from enum import Enum

from . import retrieval
from .errors import EmptyQuestion, InvalidModel, StageError, UnknownMethod
from .prompts import TEMPLATE_VERSION, context_block, load_templates, render_prompt
from .providers import (
    CompletionRequest,
    ProviderConfig,
    estimate_tokens,
    make_provider,
)
from .retrieval import HashingEmbedder, RetrievalHit, build_index, search
from .tmk import (
    Document,
    Kind,
    RENDER_TEMPLATE_ID,
    TmkModel,
    render_documents,
    validate,
)

REFUSAL_TEMPLATE_ID = "refusal/v1"

DEFAULT_K = 4
DEFAULT_SESSION_BOUND = 10

_HOW_PATTERN = re.compile(r"\bhow\s+(do|does|can)\b")


class QuestionClass(str, Enum):
    MMODEL = "mmodel"
    MULTIMODELS = "multimodels"
    CANT_ANSWER = "cant_answer"


_KINDS_BY_CLASS = {
    QuestionClass.MMODEL: frozenset({Kind.TASK, Kind.METHOD}),
    QuestionClass.MULTIMODELS: frozenset({Kind.TASK, Kind.METHOD, Kind.KNOWLEDGE}),
}


class Session:
    """Per-conversation memory: bounded (question, answer) history plus a
    one-paragraph rolling summary that enters prompts via software_qa_prompt."""

    def __init__(self, session_id: str, bound: int = DEFAULT_SESSION_BOUND):
        self.id = session_id
        self.bound = bound
        self.history: list[tuple[str, str]] = []
        self.summary = ""
        self._lock = threading.Lock()

    def append(self, question: str, answer: str) -> None:
        with self._lock:
            self.history.append((question, answer))
            if len(self.history) > self.bound:
                del self.history[: len(self.history) - self.bound]
            asked = "; ".join(q for q, _ in self.history)
            self.summary = f" Earlier in this session the user asked: {asked}."


@dataclass(frozen=True)
class ExplanationResult:
    question: str
    question_class: QuestionClass
    hits: tuple[RetrievalHit, ...]
    steps: tuple[str, ...]
    answer: str
    metadata: dict

    def as_dict(self) -> dict:
        return {
            "question": self.question,
            "class": self.question_class.value,
            "hits": [h.as_dict() for h in self.hits],
            "steps": list(self.steps),
            "answer": self.answer,
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class MethodStep:
    state_name: str
    subtask_name: str | None
    conditions: tuple[str, ...]


def decompose_method(model: TmkModel, method_id: str) -> list[MethodStep]:
    """Unroll a method's FSM into an ordered step list (chain-of-thought).

    Depth-first from the start state; at branches, successors are visited in
    ascending condition_label order; every state appears exactly once, each
    step annotated with its outgoing guard labels.
    """
    method = model.method_by_id(method_id)
    if method is None:
        raise UnknownMethod(f"no method with id '{method_id}'")
    steps: list[MethodStep] = []
    seen: set[str] = set()

    def visit(state_id: str) -> None:
        if state_id in seen:
            return
        seen.add(state_id)
        state = method.state_by_id(state_id)
        outgoing = method.outgoing(state_id)
        subtask = model.task_by_id(state.subtask) if state.subtask else None
        steps.append(MethodStep(
            state_name=state.name,
            subtask_name=subtask.name if subtask else None,
            conditions=tuple(t.condition_label for t in outgoing),
        ))
        for transition in outgoing:
            visit(transition.to_state)

    visit(method.start_state)
    return steps


def rule_classify(question: str, model: TmkModel) -> QuestionClass:
    """Deterministic fallback classifier (mock mode, unparseable provider output).

    (1) no agent name and no element name mentioned -> cant_answer;
    (2) how-interrogative plus a task or method name -> mmodel;
    (3) otherwise -> multimodels. Matching is case-insensitive substring.
    """
    if not question.strip():
        raise EmptyQuestion("question must be non-empty")
    q = question.lower()
    known = [model.agent_name] + model.element_names()
    if not any(name.lower() in q for name in known):
        return QuestionClass.CANT_ANSWER
    task_method_names = [t.name for t in model.tasks] + [m.name for m in model.methods]
    if _HOW_PATTERN.search(q) and any(name.lower() in q for name in task_method_names):
        return QuestionClass.MMODEL
    return QuestionClass.MULTIMODELS


def refusal_text(agent_name: str) -> str:
    return (f"I do not know the answer to that. "
            f"Please ask questions related to the functionality of {agent_name} only.")


class Engine:
    """Validated model + prebuilt indexes + provider: everything ask() needs.

    Immutable after construction apart from the session registry, so one
    engine can serve concurrent requests; each session serializes its own
    history appends.
    """

    def __init__(
        self,
        model: TmkModel,
        provider_config: ProviderConfig | None = None,
        embedder=None,
        k: int = DEFAULT_K,
        max_tokens: int = 1920,
        temperature: float = 0.0,
        session_bound: int = DEFAULT_SESSION_BOUND,
    ):
        report = validate(model)
        if not report.ok:
            raise InvalidModel(report)
        if k < 1:
            raise ValueError("k must be >= 1")
        self.model = model
        self.k = k
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.session_bound = session_bound
        self.provider_config = provider_config or ProviderConfig()
        self.provider = make_provider(self.provider_config)
        self.embedder = embedder or HashingEmbedder()
        self.templates = load_templates()
        self._corpora: dict[frozenset, list[Document]] = {}
        self._indexes: dict[frozenset, retrieval.VectorIndex] = {}
        for kinds in _KINDS_BY_CLASS.values():
            docs = render_documents(model, set(kinds))
            self._corpora[kinds] = docs
            self._indexes[kinds] = build_index(docs, self.embedder)
        self._documents_by_key = {
            doc.key: doc for doc in self._corpora[_KINDS_BY_CLASS[QuestionClass.MULTIMODELS]]
        }
        self._sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()

    # --- sessions ---------------------------------------------------------

    def session(self, session_id: str | None) -> Session:
        """Existing or new session; a None id gives an unregistered one-shot."""
        if session_id is None:
            return Session("single-shot", bound=self.session_bound)
        with self._sessions_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = Session(session_id, bound=self.session_bound)
            return self._sessions[session_id]

    # --- stage 1: classification -------------------------------------------

    def classify(self, question: str) -> QuestionClass:
        cls, _ = self._classify(question)
        return cls

    def _classify(self, question: str) -> tuple[QuestionClass, list[str]]:
        if not question.strip():
            raise EmptyQuestion("question must be non-empty")
        if self.provider.mode == "mock":
            return rule_classify(question, self.model), []
        prompt = self._classifier_prompt(question)
        text = self.provider.complete(CompletionRequest(
            prompt=prompt, max_tokens=self.max_tokens, temperature=self.temperature))
        found = [c for c in QuestionClass if c.value in text.lower()]
        if len(found) == 1:
            return found[0], []
        fallback = rule_classify(question, self.model)
        return fallback, [
            f"classifier output unparseable ({text[:80]!r}); rule fallback chose "
            f"{fallback.value}"
        ]

    def _classifier_prompt(self, question: str) -> str:
        names = {
            "Knowledge_names": "; ".join(c.name for c in self.model.knowledge),
            "Task_names": "; ".join(t.name for t in self.model.tasks),
            "Method_names": "; ".join(m.name for m in self.model.methods),
        }
        descs = [
            render_prompt(self.templates["multi_models_desc"], names),
            render_prompt(self.templates["mmodel_desc"],
                          {k: names[k] for k in ("Task_names", "Method_names")}),
            render_prompt(self.templates["cant_answer_desc"],
                          {"Agent_name": self.model.agent_name}),
        ]
        return (
            "Classify the user question into exactly one class.\n\n"
            + "\n\n".join(descs)
            + f"\n\nQUESTION:\n{question}\nEND QUESTION\n\n"
            + "Reply with exactly one word: mmodel, multimodels, or cant_answer."
        )

    # --- stage 2: localization -----------------------------------------------

    def localize(self, question: str, question_class: QuestionClass,
                 k: int | None = None) -> list[RetrievalHit]:
        if question_class is QuestionClass.CANT_ANSWER:
            raise ValueError("cant_answer questions are not localized")
        kinds = _KINDS_BY_CLASS[question_class]
        query = self.embedder.embed(question)
        return search(self._indexes[kinds], query, k or self.k)

    def document_for(self, hit: RetrievalHit) -> Document:
        return self._documents_by_key[f"{hit.kind.value}:{hit.element_id}"]

    # --- stage 3: generation ---------------------------------------------------

    def generate(self, question: str, question_class: QuestionClass,
                 hits: list[RetrievalHit], session: Session | None = None,
                 k_used: int | None = None) -> ExplanationResult:
        if question_class is QuestionClass.CANT_ANSWER:
            raise ValueError("cant_answer questions have no generation stage")
        if not hits:
            raise ValueError("generation needs at least one retrieval hit")
        session = session or Session("single-shot", bound=self.session_bound)
        warnings: list[str] = []
        templates_used: list[str] = []
        software_qa = render_prompt(
            self.templates["software_qa_prompt"],
            {"agent_name": self.model.agent_name, "session_summary": session.summary},
        )
        ordered = sorted(hits, key=lambda h: (-h.score, f"{h.kind.value}:{h.element_id}"))
        documents = [self.document_for(h) for h in ordered]

        steps: list[str] = []
        try:
            if question_class is QuestionClass.MMODEL:
                prompt = self._cot_prompt(question, software_qa, documents[0], ordered, warnings)
                templates_used.append("cot_method_prompt")
            else:
                prompt = self._answer_prompt(question, software_qa, documents[0], warnings)
                templates_used.append("multi_models_answer_prompt")
            steps.append(self._complete(prompt))
            for doc in documents[1:]:
                refine = self._render_with_context(
                    "refine_prompt",
                    {
                        "software_qa_prompt": software_qa,
                        "question": question,
                        "existing_answer": steps[-1],
                    },
                    [doc],
                    warnings,
                )
                if "refine_prompt" not in templates_used:
                    templates_used.append("refine_prompt")
                steps.append(self._complete(refine))
        except Exception as exc:
            raise StageError("generate", exc, partial_steps=steps) from exc

        metadata = {
            "k": k_used if k_used is not None else self.k,
            "templates": templates_used,
            "template_version": TEMPLATE_VERSION,
            "document_template": RENDER_TEMPLATE_ID,
            "provider_mode": self.provider.mode,
            "warnings": warnings,
        }
        return ExplanationResult(
            question=question,
            question_class=question_class,
            hits=tuple(ordered),
            steps=tuple(steps),
            answer=steps[-1],
            metadata=metadata,
        )

    def _answer_prompt(self, question: str, software_qa: str, doc: Document,
                       warnings: list[str]) -> str:
        return self._render_with_context(
            "multi_models_answer_prompt",
            {"software_qa_prompt": software_qa, "question": question},
            [doc],
            warnings,
        )

    def _cot_prompt(self, question: str, software_qa: str, doc: Document,
                    hits: list[RetrievalHit], warnings: list[str]) -> str:
        outlines = []
        for hit in hits:
            if hit.kind is not Kind.METHOD:
                continue
            method = self.model.method_by_id(hit.element_id)
            lines = [f"Method: {method.name}"]
            for i, step in enumerate(decompose_method(self.model, method.id), start=1):
                line = f"{i}. {step.state_name}"
                if step.subtask_name:
                    line += f" (subtask: {step.subtask_name})"
                if step.conditions:
                    line += " (conditions: " + " | ".join(step.conditions) + ")"
                lines.append(line)
            outlines.append("\n".join(lines))
        return self._render_with_context(
            "cot_method_prompt",
            {
                "software_qa_prompt": software_qa,
                "question": question,
                "method_steps": "\n\n".join(outlines) if outlines else "(no method retrieved)",
            },
            [doc],
            warnings,
        )

    def _render_with_context(self, template_id: str, bindings: dict,
                             documents: list[Document], warnings: list[str]) -> str:
        """Render a prompt, shrinking its context block to the token budget.

        The budget covers the whole prompt, so the context allowance is what
        remains after the template and the other bindings. Documents arrive
        in descending score order; whole documents are dropped from the tail
        (lowest score first), then the last body is truncated if needed.
        """
        template = self.templates[template_id]
        overhead = estimate_tokens(render_prompt(template, {**bindings, "context_str": ""}))
        budget = self.provider_config.prompt_token_limit - overhead
        docs = list(documents)
        while len(docs) > 1 and estimate_tokens(context_block(docs)) > budget:
            dropped = docs.pop()
            warnings.append(f"context document '{dropped.title}' dropped to fit token budget")
        block = context_block(docs)
        if estimate_tokens(block) > budget and docs:
            doc = docs[-1]
            overshoot_chars = (estimate_tokens(block) - budget + 2) * 4
            keep = max(0, len(doc.body) - overshoot_chars)
            docs[-1] = Document(doc.element_id, doc.kind, doc.title,
                                doc.body[:keep].rstrip() + " ...")
            warnings.append(f"context document '{doc.title}' truncated to fit token budget")
            block = context_block(docs)
        return render_prompt(template, {**bindings, "context_str": block})

    def _complete(self, prompt: str) -> str:
        return self.provider.complete(CompletionRequest(
            prompt=prompt, max_tokens=self.max_tokens, temperature=self.temperature))

    # --- end to end ---------------------------------------------------------------

    def ask(self, question: str, session: Session | str | None = None,
            k: int | None = None) -> ExplanationResult:
        """classify -> localize -> generate, with session memory.

        cant_answer short-circuits to the fixed refusal without touching the
        index or the provider. Failures carry the stage they occurred in.
        """
        question = question.strip()
        if not question:
            raise EmptyQuestion("question must be non-empty")
        if not isinstance(session, Session):
            session = self.session(session)
        k_used = k if k is not None else self.k

        try:
            question_class, warnings = self._classify(question)
        except StageError:
            raise
        except EmptyQuestion:
            raise
        except Exception as exc:
            raise StageError("classify", exc) from exc

        if question_class is QuestionClass.CANT_ANSWER:
            answer = refusal_text(self.model.agent_name)
            result = ExplanationResult(
                question=question,
                question_class=question_class,
                hits=(),
                steps=(),
                answer=answer,
                metadata={
                    "k": k_used,
                    "templates": [],
                    "template_version": TEMPLATE_VERSION,
                    "refusal_template": REFUSAL_TEMPLATE_ID,
                    "provider_mode": self.provider.mode,
                    "warnings": warnings,
                },
            )
            session.append(question, answer)
            return result

        try:
            hits = self.localize(question, question_class, k=k_used)
        except Exception as exc:
            raise StageError("localize", exc) from exc

        result = self.generate(question, question_class, hits, session=session, k_used=k_used)
        if warnings:
            result.metadata["warnings"] = warnings + result.metadata["warnings"]
        session.append(question, result.answer)
        return result
