"""Derivational traces: symbolic walks over the task/method hierarchy.

A trace records, for one task instance, which method was chosen, which FSM
states were visited and under which condition labels, and how subtasks were
expanded along the way. Conditions are not evaluated; choice points are
resolved by explicit selectors with documented defaults (first method by
ascending id, first transition by ascending condition label), so a trace is
a deterministic function of (model, task, selectors).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import EmptyQuestion, StepBoundExceeded, UnknownTask, UnresolvedChoice
from .prompts import PromptTemplate, context_block, render_prompt
from .providers import CompletionRequest, make_provider
from .tmk import Document, Kind, Method, TmkModel

DEFAULT_STEP_BOUND = 1000


@dataclass(frozen=True)
class VisitedState:
    state_id: str
    state_name: str
    subtask: str | None
    taken_label: str | None  # None when the walk stops at this state


@dataclass(frozen=True)
class TraceNode:
    task_id: str
    task_name: str
    method_id: str | None
    method_name: str | None
    visited_states: tuple[VisitedState, ...]
    children: tuple["TraceNode", ...]


@dataclass(frozen=True)
class DerivationalTrace:
    agent_name: str
    root: TraceNode
    instance_bindings: tuple[tuple[str, str], ...] = ()

    def node_count(self) -> int:
        def count(node: TraceNode) -> int:
            return 1 + sum(count(c) for c in node.children)
        return count(self.root)


def derive_trace(
    model: TmkModel,
    task_id: str,
    bindings: Mapping[str, str] | None = None,
    method_selector: Mapping[str, str] | None = None,
    path_selector: Mapping[str, str] | None = None,
    step_bound: int = DEFAULT_STEP_BOUND,
) -> DerivationalTrace:
    """Walk the hierarchy from a task and record the derivation.

    ``method_selector`` maps task id -> method id where a task has several
    methods; ``path_selector`` maps state id -> condition label where a
    state has several outgoing transitions. The total number of visited FSM
    states across the whole trace is capped by ``step_bound``; exceeding it
    (an FSM loop under the chosen selectors) raises StepBoundExceeded.
    """
    if model.task_by_id(task_id) is None:
        raise UnknownTask(f"no task with id '{task_id}'")
    method_selector = dict(method_selector or {})
    path_selector = dict(path_selector or {})
    budget = step_bound

    def pick_method(task) -> Method | None:
        candidates = sorted(task.by_methods)
        if not candidates:
            return None
        if task.id in method_selector:
            chosen = method_selector[task.id]
            if chosen not in candidates:
                raise UnresolvedChoice(
                    f"task '{task.id}' has no method '{chosen}' (candidates: {candidates})")
        else:
            chosen = candidates[0]
        return model.method_by_id(chosen)

    def walk(task) -> TraceNode:
        nonlocal budget
        method = pick_method(task)
        if method is None:
            return TraceNode(task.id, task.name, None, None, (), ())
        visited: list[VisitedState] = []
        children: list[TraceNode] = []
        current = method.start_state
        while True:
            budget -= 1
            if budget < 0:
                raise StepBoundExceeded(
                    f"trace exceeded step bound {step_bound} in method '{method.id}'")
            state = method.state_by_id(current)
            outgoing = method.outgoing(current)
            if state.terminal or not outgoing:
                visited.append(VisitedState(state.id, state.name, state.subtask, None))
                if state.subtask:
                    children.append(walk(model.task_by_id(state.subtask)))
                break
            if state.id in path_selector:
                label = path_selector[state.id]
                transition = next((t for t in outgoing if t.condition_label == label), None)
                if transition is None:
                    raise UnresolvedChoice(
                        f"state '{state.id}' has no outgoing transition labeled '{label}'")
            else:
                transition = outgoing[0]
            visited.append(VisitedState(state.id, state.name, state.subtask,
                                        transition.condition_label))
            if state.subtask:
                children.append(walk(model.task_by_id(state.subtask)))
            current = transition.to_state
        return TraceNode(task.id, task.name, method.id, method.name,
                         tuple(visited), tuple(children))

    root = walk(model.task_by_id(task_id))
    return DerivationalTrace(
        agent_name=model.agent_name,
        root=root,
        instance_bindings=tuple(sorted((bindings or {}).items())),
    )


# --- serialization ---------------------------------------------------------------


def _node_outline(node: TraceNode, indent: int, lines: list[str]) -> None:
    pad = "  " * indent
    lines.append(f"{pad}Task: {node.task_name} [{node.task_id}]")
    if node.method_id is None:
        return
    lines.append(f"{pad}  Method: {node.method_name} [{node.method_id}]")
    children = list(node.children)
    for vs in node.visited_states:
        arrow = f" -> {vs.taken_label}" if vs.taken_label else " (end)"
        lines.append(f"{pad}    State: {vs.state_name}{arrow}")
        if vs.subtask and children:
            _node_outline(children.pop(0), indent + 3, lines)


def to_outline(trace: DerivationalTrace) -> str:
    """Indented UTF-8 step outline of the whole trace."""
    lines = [f"Derivational trace for {trace.agent_name}"]
    for concept_id, value in trace.instance_bindings:
        lines.append(f"Given: {concept_id} = {value}")
    _node_outline(trace.root, 0, lines)
    return "\n".join(lines) + "\n"


def _node_to_dict(node: TraceNode) -> dict:
    return {
        "task_id": node.task_id,
        "task_name": node.task_name,
        "method_id": node.method_id,
        "method_name": node.method_name,
        "visited_states": [
            {"state_id": vs.state_id, "state_name": vs.state_name,
             "subtask": vs.subtask, "taken_label": vs.taken_label}
            for vs in node.visited_states
        ],
        "children": [_node_to_dict(c) for c in node.children],
    }


def _node_from_dict(data: dict) -> TraceNode:
    return TraceNode(
        task_id=data["task_id"],
        task_name=data["task_name"],
        method_id=data["method_id"],
        method_name=data["method_name"],
        visited_states=tuple(
            VisitedState(vs["state_id"], vs["state_name"], vs["subtask"], vs["taken_label"])
            for vs in data["visited_states"]
        ),
        children=tuple(_node_from_dict(c) for c in data["children"]),
    )


def trace_to_dict(trace: DerivationalTrace) -> dict:
    return {
        "agent_name": trace.agent_name,
        "instance_bindings": [list(pair) for pair in trace.instance_bindings],
        "root": _node_to_dict(trace.root),
    }


def trace_from_dict(data: dict) -> DerivationalTrace:
    return DerivationalTrace(
        agent_name=data["agent_name"],
        root=_node_from_dict(data["root"]),
        instance_bindings=tuple((k, v) for k, v in data["instance_bindings"]),
    )


# --- trace-grounded explanation ----------------------------------------------------


def _node_documents(node: TraceNode, docs: list[Document]) -> None:
    body_lines = []
    if node.method_name:
        body_lines.append(f"Method: {node.method_name}.")
        for vs in node.visited_states:
            step = f"State: {vs.state_name}"
            if vs.subtask:
                step += f" (expands subtask {vs.subtask})"
            if vs.taken_label:
                step += f" -> {vs.taken_label}"
            body_lines.append(step + ".")
    else:
        body_lines.append(f"Leaf task: {node.task_name}.")
    docs.append(Document(
        element_id=node.task_id,
        kind=Kind.TASK,
        title=node.task_name,
        body="\n".join(body_lines),
    ))
    for child in node.children:
        _node_documents(child, docs)


def explain_trace(trace: DerivationalTrace, question: str, provider_config,
                  templates: Mapping[str, PromptTemplate], max_tokens: int = 1920,
                  temperature: float = 0.0) -> str:
    """Answer a question by reflecting on a derivational trace.

    The trace is serialized node by node into the answer prompt's context
    block (one document per trace node, titled by task name), so mock-mode
    output mentions every task name in the trace.
    """
    if not question.strip():
        raise EmptyQuestion("question must be non-empty")
    docs: list[Document] = []
    _node_documents(trace.root, docs)
    software_qa = render_prompt(
        templates["software_qa_prompt"],
        {"agent_name": trace.agent_name, "session_summary": ""},
    )
    prompt = render_prompt(
        templates["multi_models_answer_prompt"],
        {
            "software_qa_prompt": software_qa,
            "context_str": context_block(docs),
            "question": question,
        },
    )
    provider = make_provider(provider_config)
    return provider.complete(CompletionRequest(
        prompt=prompt, max_tokens=max_tokens, temperature=temperature))
