"""The six documented single-field model mutations and their error codes.

Each mutation edits one field of the raw fixture document and triggers
exactly one validation error code. Shared by the unit and acceptance tests.
"""

import copy


def dangling_state(raw):
    raw["methods"][0]["transitions"][2]["to_state"] = "s-missing"


def cyclic_hierarchy(raw):
    # makes a task a subtask of its own descendant
    raw["tasks"][3]["subtasks"].append("t-finish-ecology-experiment")


def duplicate_id(raw):
    raw["tasks"][1]["id"] = raw["tasks"][0]["id"]


def nondeterministic_fsm(raw):
    raw["methods"][0]["transitions"].append({
        "from_state": "s-exp-simulate",
        "to_state": "s-exp-done",
        "condition_label": "model needs editing",
    })


def unreachable_state(raw):
    raw["methods"][0]["states"].append({
        "id": "s-exp-orphan",
        "name": "Orphaned step",
        "subtask": None,
        "terminal": False,
    })


def missing_concept_ref(raw):
    raw["tasks"][1]["givens"][0] = "c-missing"


MUTATIONS = {
    "DANGLING_STATE": dangling_state,
    "CYCLIC_HIERARCHY": cyclic_hierarchy,
    "DUPLICATE_ID": duplicate_id,
    "NONDETERMINISTIC_FSM": nondeterministic_fsm,
    "UNREACHABLE_STATE": unreachable_state,
    "DANGLING_CONCEPT": missing_concept_ref,
}


def mutate(raw, mutation) -> dict:
    mutated = copy.deepcopy(raw)
    mutation(mutated)
    return mutated
