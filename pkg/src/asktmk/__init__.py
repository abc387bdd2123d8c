"""Self-explanation engine for interactive agents with TMK self-models.

Parse and validate a Task-Method-Knowledge model of an agent, then answer
natural-language questions about how the agent works through a three-stage
pipeline (classify, localize, generate) and derive symbolic traces of its
task/method hierarchy.
"""

from .config import EngineConfig, build_engine, resolve_config
from .errors import AskTmkError
from .evalbank import aggregate, apply_ratings, bundled_bank, load_bank, run_bank
from .pipeline import Engine, ExplanationResult, QuestionClass, Session, decompose_method
from .providers import CompletionRequest, ProviderConfig, complete, make_provider
from .prompts import PromptTemplate, load_templates, render_prompt
from .retrieval import (
    HashingEmbedder,
    RetrievalHit,
    VectorIndex,
    build_index,
    search,
    similarity,
)
from .tmk import (
    Document,
    Kind,
    TmkModel,
    ValidationReport,
    parse_model,
    render_documents,
    serialize,
    validate,
    validate_source,
)
from .trace import DerivationalTrace, TraceNode, derive_trace, explain_trace, to_outline

__version__ = "0.1.0"

__all__ = [
    "AskTmkError",
    "CompletionRequest",
    "DerivationalTrace",
    "Document",
    "Engine",
    "EngineConfig",
    "ExplanationResult",
    "HashingEmbedder",
    "Kind",
    "PromptTemplate",
    "ProviderConfig",
    "QuestionClass",
    "RetrievalHit",
    "Session",
    "TmkModel",
    "TraceNode",
    "ValidationReport",
    "VectorIndex",
    "aggregate",
    "apply_ratings",
    "build_engine",
    "build_index",
    "bundled_bank",
    "complete",
    "decompose_method",
    "derive_trace",
    "explain_trace",
    "load_bank",
    "load_templates",
    "make_provider",
    "parse_model",
    "render_documents",
    "render_prompt",
    "resolve_config",
    "run_bank",
    "search",
    "serialize",
    "similarity",
    "to_outline",
    "validate",
    "validate_source",
]
