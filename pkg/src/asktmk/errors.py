"""Exception types shared across the package.

Every error carries a stable ``code`` (SCREAMING_SNAKE) so the CLI and the
HTTP service can report failures as single-line machine-readable codes.
"""

from __future__ import annotations


class AskTmkError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- model parsing / validation ------------------------------------------


class MalformedInput(AskTmkError):
    """Input is not syntactically valid JSON."""

    code = "MALFORMED_INPUT"


class SchemaViolation(AskTmkError):
    """Input parses but does not match the model schema.

    ``code`` is refined per violation (MISSING_FIELD, WRONG_TYPE,
    UNKNOWN_FIELD, DUPLICATE_ID, NO_TASKS); ``path`` locates it.
    """

    code = "SCHEMA_VIOLATION"

    def __init__(self, code: str, path: str, message: str):
        super().__init__(f"{code} at {path}: {message}")
        self.code = code
        self.path = path
        self.detail = message


class InvalidModel(AskTmkError):
    """A model failed semantic validation; carries the full report."""

    code = "INVALID_MODEL"

    def __init__(self, report):
        codes = ", ".join(e.code for e in report.errors)
        super().__init__(f"model is invalid: {codes}")
        self.report = report


# --- retrieval -------------------------------------------------------------


class EmptyText(AskTmkError):
    code = "EMPTY_TEXT"


class EmptyKindSet(AskTmkError):
    code = "EMPTY_KIND_SET"


class DimensionMismatch(AskTmkError):
    code = "DIMENSION_MISMATCH"


class DuplicateKey(AskTmkError):
    code = "DUPLICATE_KEY"


class EmptyCorpus(AskTmkError):
    code = "EMPTY_CORPUS"


# --- prompts / providers ----------------------------------------------------


class MissingBinding(AskTmkError):
    code = "MISSING_BINDING"

    def __init__(self, name: str):
        super().__init__(f"missing binding: {name}")
        self.name = name


class UnknownBinding(AskTmkError):
    code = "UNKNOWN_BINDING"

    def __init__(self, name: str):
        super().__init__(f"unknown binding: {name}")
        self.name = name


class ProviderUnavailable(AskTmkError):
    code = "PROVIDER_UNAVAILABLE"


class ProviderError(AskTmkError):
    code = "PROVIDER_ERROR"

    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned status {status}")
        self.status = status
        self.body = body


class BudgetExceeded(AskTmkError):
    code = "BUDGET_EXCEEDED"


# --- pipeline / trace -------------------------------------------------------


class EmptyQuestion(AskTmkError):
    code = "EMPTY_QUESTION"


class UnknownTask(AskTmkError):
    code = "UNKNOWN_TASK"


class UnknownMethod(AskTmkError):
    code = "UNKNOWN_METHOD"


class StepBoundExceeded(AskTmkError):
    code = "STEP_BOUND_EXCEEDED"


class UnresolvedChoice(AskTmkError):
    code = "UNRESOLVED_CHOICE"


class StageError(AskTmkError):
    """Wraps a failure with the pipeline stage it occurred in."""

    code = "STAGE_ERROR"

    def __init__(self, stage: str, cause: Exception, partial_steps=None):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial_steps = list(partial_steps or [])
        if isinstance(cause, AskTmkError):
            self.code = cause.code


# --- evaluation harness ------------------------------------------------------


class MalformedBank(AskTmkError):
    code = "MALFORMED_BANK"


class UnknownCategory(AskTmkError):
    code = "UNKNOWN_CATEGORY"


class UnratedRecord(AskTmkError):
    code = "UNRATED_RECORD"

    def __init__(self, question_id: str):
        super().__init__(f"record not rated: {question_id}")
        self.question_id = question_id


# --- service ------------------------------------------------------------------


class PortInUse(AskTmkError):
    code = "PORT_IN_USE"
