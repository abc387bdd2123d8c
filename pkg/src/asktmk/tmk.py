"""TMK self-model: domain types, parsing, validation, document rendering.

A TMK model describes an agent as tasks (what it does, stated through the
concepts it is given and the concepts it makes), methods (how it does it,
as deterministic finite state machines), and knowledge (the concepts those
tasks and methods are defined over). Models are immutable after parse and
safe to share across threads; every operation here is a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import EmptyKindSet, MalformedInput, SchemaViolation


class Kind(str, Enum):
    """The three element families of a model, in canonical order."""

    TASK = "task"
    METHOD = "method"
    KNOWLEDGE = "knowledge"


_KIND_ORDER = {Kind.TASK: 0, Kind.METHOD: 1, Kind.KNOWLEDGE: 2}

#: Version tag of the document rendering below; recorded in index dumps and
#: answer metadata so retrieval results can be traced to a rendering.
RENDER_TEMPLATE_ID = "tmk-doc/v1"


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    definition: str
    relations: tuple[tuple[str, str], ...] = ()  # (relation_name, concept id)


@dataclass(frozen=True)
class Task:
    id: str
    name: str
    description: str
    givens: tuple[str, ...] = ()
    makes: tuple[str, ...] = ()
    subtasks: tuple[str, ...] = ()
    by_methods: tuple[str, ...] = ()
    top_level: bool = False


@dataclass(frozen=True)
class State:
    id: str
    name: str
    subtask: str | None = None
    terminal: bool = False


@dataclass(frozen=True)
class Transition:
    from_state: str
    to_state: str
    condition_label: str


@dataclass(frozen=True)
class Method:
    id: str
    name: str
    description: str
    implements: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]
    start_state: str

    def state_by_id(self, state_id: str) -> State | None:
        for s in self.states:
            if s.id == state_id:
                return s
        return None

    def outgoing(self, state_id: str) -> list[Transition]:
        """Transitions leaving a state, in ascending condition_label order."""
        out = [t for t in self.transitions if t.from_state == state_id]
        out.sort(key=lambda t: (t.condition_label, t.to_state))
        return out


@dataclass(frozen=True)
class TmkModel:
    agent_name: str
    version: str
    tasks: tuple[Task, ...]
    methods: tuple[Method, ...]
    knowledge: tuple[Concept, ...]

    def task_by_id(self, task_id: str) -> Task | None:
        return next((t for t in self.tasks if t.id == task_id), None)

    def method_by_id(self, method_id: str) -> Method | None:
        return next((m for m in self.methods if m.id == method_id), None)

    def concept_by_id(self, concept_id: str) -> Concept | None:
        return next((c for c in self.knowledge if c.id == concept_id), None)

    def top_level_task(self) -> Task:
        return next(t for t in self.tasks if t.top_level)

    def element_names(self) -> list[str]:
        return (
            [t.name for t in self.tasks]
            + [m.name for m in self.methods]
            + [c.name for c in self.knowledge]
        )


@dataclass(frozen=True)
class Document:
    """A retrievable text rendering of one model element."""

    element_id: str
    kind: Kind
    title: str
    body: str

    @property
    def key(self) -> str:
        return f"{self.kind.value}:{self.element_id}"


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [e.code for e in self.errors]


# --- parsing ------------------------------------------------------------------

_TASK_FIELDS = {
    "id", "name", "description", "givens", "makes", "subtasks",
    "by_methods", "top_level",
}
_METHOD_FIELDS = {
    "id", "name", "description", "implements", "states", "transitions",
    "start_state",
}
_STATE_FIELDS = {"id", "name", "subtask", "terminal"}
_TRANSITION_FIELDS = {"from_state", "to_state", "condition_label"}
_CONCEPT_FIELDS = {"id", "name", "definition", "relations"}
_MODEL_FIELDS = {"agent_name", "version", "tasks", "methods", "knowledge"}


def _need(obj: Mapping, key: str, typ, path: str):
    if key not in obj:
        raise SchemaViolation("MISSING_FIELD", path, f"missing required field '{key}'")
    value = obj[key]
    if typ is bool and not isinstance(value, bool):
        raise SchemaViolation("WRONG_TYPE", f"{path}.{key}", "expected a boolean")
    if typ is str and not isinstance(value, str):
        raise SchemaViolation("WRONG_TYPE", f"{path}.{key}", "expected a string")
    if typ is list and not isinstance(value, list):
        raise SchemaViolation("WRONG_TYPE", f"{path}.{key}", "expected a list")
    return value


def _opt(obj: Mapping, key: str, typ, path: str, default):
    if key not in obj or obj[key] is None:
        return default
    return _need(obj, key, typ, path)


def _check_mapping(obj, allowed: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation("WRONG_TYPE", path, "expected an object")
    for key in obj:
        if key not in allowed:
            raise SchemaViolation("UNKNOWN_FIELD", f"{path}.{key}", f"unknown field '{key}'")


def _str_list(values, path: str) -> tuple[str, ...]:
    out = []
    for i, v in enumerate(values):
        if not isinstance(v, str):
            raise SchemaViolation("WRONG_TYPE", f"{path}[{i}]", "expected a string")
        out.append(v)
    return tuple(out)


def _check_unique(ids: Iterable[str], namespace: str, path: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise SchemaViolation("DUPLICATE_ID", path, f"duplicate {namespace} id '{i}'")
        seen.add(i)


def _parse_task(obj, path: str) -> Task:
    _check_mapping(obj, _TASK_FIELDS, path)
    return Task(
        id=_need(obj, "id", str, path),
        name=_need(obj, "name", str, path),
        description=_need(obj, "description", str, path),
        givens=_str_list(_opt(obj, "givens", list, path, []), f"{path}.givens"),
        makes=_str_list(_opt(obj, "makes", list, path, []), f"{path}.makes"),
        subtasks=_str_list(_opt(obj, "subtasks", list, path, []), f"{path}.subtasks"),
        by_methods=_str_list(_opt(obj, "by_methods", list, path, []), f"{path}.by_methods"),
        top_level=_opt(obj, "top_level", bool, path, False),
    )


def _parse_state(obj, path: str) -> State:
    _check_mapping(obj, _STATE_FIELDS, path)
    subtask = obj.get("subtask")
    if subtask is not None and not isinstance(subtask, str):
        raise SchemaViolation("WRONG_TYPE", f"{path}.subtask", "expected a string or null")
    return State(
        id=_need(obj, "id", str, path),
        name=_need(obj, "name", str, path),
        subtask=subtask,
        terminal=_opt(obj, "terminal", bool, path, False),
    )


def _parse_transition(obj, path: str) -> Transition:
    _check_mapping(obj, _TRANSITION_FIELDS, path)
    return Transition(
        from_state=_need(obj, "from_state", str, path),
        to_state=_need(obj, "to_state", str, path),
        condition_label=_need(obj, "condition_label", str, path),
    )


def _parse_method(obj, path: str) -> Method:
    _check_mapping(obj, _METHOD_FIELDS, path)
    states_raw = _need(obj, "states", list, path)
    if not states_raw:
        raise SchemaViolation("MISSING_FIELD", f"{path}.states", "a method needs at least one state")
    states = tuple(_parse_state(s, f"{path}.states[{i}]") for i, s in enumerate(states_raw))
    _check_unique((s.id for s in states), "state", f"{path}.states")
    transitions = tuple(
        _parse_transition(t, f"{path}.transitions[{i}]")
        for i, t in enumerate(_opt(obj, "transitions", list, path, []))
    )
    return Method(
        id=_need(obj, "id", str, path),
        name=_need(obj, "name", str, path),
        description=_need(obj, "description", str, path),
        implements=_need(obj, "implements", str, path),
        states=states,
        transitions=transitions,
        start_state=_need(obj, "start_state", str, path),
    )


def _parse_concept(obj, path: str) -> Concept:
    _check_mapping(obj, _CONCEPT_FIELDS, path)
    relations = []
    for i, rel in enumerate(_opt(obj, "relations", list, path, [])):
        rel_path = f"{path}.relations[{i}]"
        _check_mapping(rel, {"relation_name", "target"}, rel_path)
        relations.append((
            _need(rel, "relation_name", str, rel_path),
            _need(rel, "target", str, rel_path),
        ))
    return Concept(
        id=_need(obj, "id", str, path),
        name=_need(obj, "name", str, path),
        definition=_need(obj, "definition", str, path),
        relations=tuple(relations),
    )


def parse_model(data: bytes | str) -> TmkModel:
    """Parse the UTF-8 JSON interchange form into a TmkModel.

    Structural checks only (field presence, types, id uniqueness, at least
    one task); semantic integrity is `validate`'s job. Raises MalformedInput
    on syntax errors and SchemaViolation otherwise.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"input is not valid UTF-8: {exc}") from exc
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"input is not valid JSON: {exc}") from exc

    _check_mapping(raw, _MODEL_FIELDS, "$")
    tasks_raw = _need(raw, "tasks", list, "$")
    if not tasks_raw:
        raise SchemaViolation("NO_TASKS", "$.tasks", "a model needs at least one task")
    tasks = tuple(_parse_task(t, f"$.tasks[{i}]") for i, t in enumerate(tasks_raw))
    methods = tuple(
        _parse_method(m, f"$.methods[{i}]")
        for i, m in enumerate(_opt(raw, "methods", list, "$", []))
    )
    knowledge = tuple(
        _parse_concept(c, f"$.knowledge[{i}]")
        for i, c in enumerate(_opt(raw, "knowledge", list, "$", []))
    )
    _check_unique((t.id for t in tasks), "task", "$.tasks")
    _check_unique((m.id for m in methods), "method", "$.methods")
    _check_unique((c.id for c in knowledge), "concept", "$.knowledge")
    return TmkModel(
        agent_name=_need(raw, "agent_name", str, "$"),
        version=_need(raw, "version", str, "$"),
        tasks=tasks,
        methods=methods,
        knowledge=knowledge,
    )


def serialize(model: TmkModel) -> str:
    """Serialize a model back to its interchange form (round-trips parse)."""
    doc = {
        "agent_name": model.agent_name,
        "version": model.version,
        "tasks": [
            {
                "id": t.id, "name": t.name, "description": t.description,
                "givens": list(t.givens), "makes": list(t.makes),
                "subtasks": list(t.subtasks), "by_methods": list(t.by_methods),
                "top_level": t.top_level,
            }
            for t in model.tasks
        ],
        "methods": [
            {
                "id": m.id, "name": m.name, "description": m.description,
                "implements": m.implements,
                "states": [
                    {"id": s.id, "name": s.name, "subtask": s.subtask, "terminal": s.terminal}
                    for s in m.states
                ],
                "transitions": [
                    {"from_state": t.from_state, "to_state": t.to_state,
                     "condition_label": t.condition_label}
                    for t in m.transitions
                ],
                "start_state": m.start_state,
            }
            for m in model.methods
        ],
        "knowledge": [
            {
                "id": c.id, "name": c.name, "definition": c.definition,
                "relations": [
                    {"relation_name": rn, "target": target} for rn, target in c.relations
                ],
            }
            for c in model.knowledge
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# --- validation ----------------------------------------------------------------

# Error codes, each documented in the README with a minimal triggering example:
NO_TASKS = "NO_TASKS"
TOP_LEVEL_COUNT = "TOP_LEVEL_COUNT"
DUPLICATE_ID = "DUPLICATE_ID"
DANGLING_CONCEPT = "DANGLING_CONCEPT"
DANGLING_TASK = "DANGLING_TASK"
DANGLING_METHOD = "DANGLING_METHOD"
DANGLING_STATE = "DANGLING_STATE"
CYCLIC_HIERARCHY = "CYCLIC_HIERARCHY"
MISSING_METHOD = "MISSING_METHOD"
METHOD_TASK_MISMATCH = "METHOD_TASK_MISMATCH"
NONDETERMINISTIC_FSM = "NONDETERMINISTIC_FSM"
UNREACHABLE_STATE = "UNREACHABLE_STATE"
TERMINAL_WITH_OUTGOING = "TERMINAL_WITH_OUTGOING"
EMPTY_CONDITION_LABEL = "EMPTY_CONDITION_LABEL"


def validate(model: TmkModel) -> ValidationReport:
    """Check every semantic invariant of a parsed model.

    Violations are data, not exceptions: the report lists each one with a
    stable code and the path of the offending element. Pure: the same model
    yields the same report regardless of element order in the input.
    """
    errors: list[ValidationIssue] = []

    def err(code: str, path: str, message: str) -> None:
        errors.append(ValidationIssue(code, path, message))

    task_ids = {t.id for t in model.tasks}
    method_ids = {m.id for m in model.methods}
    concept_ids = {c.id for c in model.knowledge}

    if not model.tasks:
        err(NO_TASKS, "$.tasks", "a model needs at least one task")
    top = [t for t in model.tasks if t.top_level]
    if len(top) != 1:
        err(TOP_LEVEL_COUNT, "$.tasks",
            f"exactly one task must be top-level, found {len(top)}")

    for namespace, ids in (("task", [t.id for t in model.tasks]),
                           ("method", [m.id for m in model.methods]),
                           ("concept", [c.id for c in model.knowledge])):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                err(DUPLICATE_ID, f"$.{namespace}s", f"duplicate {namespace} id '{i}'")
            seen.add(i)

    for t in sorted(model.tasks, key=lambda t: t.id):
        path = f"task '{t.id}'"
        for ref in t.givens + t.makes:
            if ref not in concept_ids:
                err(DANGLING_CONCEPT, path, f"references missing concept '{ref}'")
        for ref in t.subtasks:
            if ref not in task_ids:
                err(DANGLING_TASK, path, f"references missing subtask '{ref}'")
        for ref in t.by_methods:
            if ref not in method_ids:
                err(DANGLING_METHOD, path, f"references missing method '{ref}'")
            else:
                m = model.method_by_id(ref)
                if m is not None and m.implements != t.id:
                    err(METHOD_TASK_MISMATCH, path,
                        f"method '{ref}' implements '{m.implements}', not this task")
        if t.subtasks and not t.by_methods:
            err(MISSING_METHOD, path, "a task with subtasks needs at least one method")

    # subtask hierarchy must be acyclic; one error per back-edge found
    color = {t.id: 0 for t in model.tasks}  # 0 unvisited, 1 on stack, 2 done
    path_stack: list[str] = []

    def visit(task_id: str) -> None:
        color[task_id] = 1
        path_stack.append(task_id)
        for sub in model.task_by_id(task_id).subtasks:
            if sub not in task_ids:
                continue
            if color[sub] == 1:
                cycle = " -> ".join(path_stack[path_stack.index(sub):] + [sub])
                err(CYCLIC_HIERARCHY, f"task '{task_id}'", f"subtask cycle: {cycle}")
            elif color[sub] == 0:
                visit(sub)
        path_stack.pop()
        color[task_id] = 2

    for t in sorted(model.tasks, key=lambda t: t.id):
        if color[t.id] == 0:
            visit(t.id)

    for m in sorted(model.methods, key=lambda m: m.id):
        path = f"method '{m.id}'"
        state_ids = {s.id for s in m.states}
        if m.implements not in task_ids:
            err(DANGLING_TASK, path, f"implements missing task '{m.implements}'")
        if m.start_state not in state_ids:
            err(DANGLING_STATE, path, f"start_state '{m.start_state}' is not a declared state")
        for s in m.states:
            if s.subtask is not None and s.subtask not in task_ids:
                err(DANGLING_TASK, f"{path} state '{s.id}'",
                    f"references missing subtask '{s.subtask}'")
        seen_pairs: set[tuple[str, str]] = set()
        for tr in m.transitions:
            tpath = f"{path} transition '{tr.from_state}' -[{tr.condition_label}]-> '{tr.to_state}'"
            for endpoint in (tr.from_state, tr.to_state):
                if endpoint not in state_ids:
                    err(DANGLING_STATE, tpath, f"references missing state '{endpoint}'")
            if not tr.condition_label.strip():
                err(EMPTY_CONDITION_LABEL, tpath, "condition_label must be non-empty")
            pair = (tr.from_state, tr.condition_label)
            if pair in seen_pairs:
                err(NONDETERMINISTIC_FSM, f"{path} state '{tr.from_state}'",
                    f"two transitions leave '{tr.from_state}' on '{tr.condition_label}'")
            seen_pairs.add(pair)
        for s in m.states:
            if s.terminal and any(tr.from_state == s.id for tr in m.transitions):
                err(TERMINAL_WITH_OUTGOING, f"{path} state '{s.id}'",
                    "terminal state has outgoing transitions")
        # reachability from start_state, ignoring dangling endpoints
        reached = set()
        frontier = [m.start_state] if m.start_state in state_ids else []
        while frontier:
            current = frontier.pop()
            if current in reached:
                continue
            reached.add(current)
            for tr in m.transitions:
                if tr.from_state == current and tr.to_state in state_ids:
                    frontier.append(tr.to_state)
        for s in m.states:
            if s.id not in reached:
                err(UNREACHABLE_STATE, f"{path} state '{s.id}'",
                    f"state '{s.id}' is not reachable from start_state")

    for c in sorted(model.knowledge, key=lambda c: c.id):
        for rn, target in c.relations:
            if target not in concept_ids:
                err(DANGLING_CONCEPT, f"concept '{c.id}'",
                    f"relation '{rn}' targets missing concept '{target}'")

    # canonical order: content-based paths plus this sort make the report
    # independent of element order in the source document
    errors.sort(key=lambda e: (e.path, e.code, e.message))
    return ValidationReport(errors=tuple(errors))


def validate_source(data: bytes | str) -> ValidationReport:
    """Parse then validate, folding structural errors into the report.

    MalformedInput (syntax) still raises; everything downstream of a
    successful JSON decode becomes report entries.
    """
    try:
        model = parse_model(data)
    except SchemaViolation as exc:
        return ValidationReport(errors=(ValidationIssue(exc.code, exc.path, exc.detail),))
    return validate(model)


# --- document rendering ----------------------------------------------------------


def _names(model: TmkModel, concept_ids: Iterable[str]) -> str:
    names = []
    for cid in concept_ids:
        c = model.concept_by_id(cid)
        names.append(c.name if c else cid)
    return "; ".join(names) if names else "(none)"


def _task_body(model: TmkModel, t: Task) -> str:
    subtask_names = "; ".join(
        (model.task_by_id(s).name if model.task_by_id(s) else s) for s in t.subtasks
    ) or "(none)"
    method_names = "; ".join(
        (model.method_by_id(m).name if model.method_by_id(m) else m) for m in t.by_methods
    ) or "(none)"
    return (
        f"Task: {t.name}. {t.description}\n"
        f"Givens: {_names(model, t.givens)}\n"
        f"Makes: {_names(model, t.makes)}\n"
        f"Subtasks: {subtask_names}\n"
        f"Methods: {method_names}"
    )


def _method_body(model: TmkModel, m: Method) -> str:
    implements = model.task_by_id(m.implements)
    state_line = "; ".join(s.name for s in m.states)
    transition_line = "; ".join(
        f"{t.from_state} -[{t.condition_label}]-> {t.to_state}" for t in m.transitions
    ) or "(none)"
    return (
        f"Method: {m.name}. {m.description}\n"
        f"Implements: {implements.name if implements else m.implements}\n"
        f"States: {state_line}\n"
        f"Transitions: {transition_line}"
    )


def _concept_body(model: TmkModel, c: Concept) -> str:
    relation_line = "; ".join(
        f"{rn} {model.concept_by_id(t).name if model.concept_by_id(t) else t}"
        for rn, t in c.relations
    ) or "(none)"
    return (
        f"Concept: {c.name}. {c.definition}\n"
        f"Relations: {relation_line}"
    )


def render_documents(model: TmkModel, kinds: set[Kind]) -> list[Document]:
    """Render one Document per element whose kind is selected.

    The rendering (RENDER_TEMPLATE_ID) is fixed and deterministic; output is
    ordered by (kind, element_id) with kinds in task, method, knowledge order.
    Expects a validated model. Raises EmptyKindSet for an empty selection.
    """
    if not kinds:
        raise EmptyKindSet("at least one kind must be selected")
    docs: list[Document] = []
    if Kind.TASK in kinds:
        for t in model.tasks:
            docs.append(Document(t.id, Kind.TASK, t.name, _task_body(model, t)))
    if Kind.METHOD in kinds:
        for m in model.methods:
            docs.append(Document(m.id, Kind.METHOD, m.name, _method_body(model, m)))
    if Kind.KNOWLEDGE in kinds:
        for c in model.knowledge:
            docs.append(Document(c.id, Kind.KNOWLEDGE, c.name, _concept_body(model, c)))
    docs.sort(key=lambda d: (_KIND_ORDER[d.kind], d.element_id))
    return docs
