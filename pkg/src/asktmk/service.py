"""HTTP front door: question answering, model summary, tracing, evaluation.

Every response carries an X-Request-ID header that is also echoed in the
log line for the request; error bodies name the pipeline stage that failed.
With the mock provider and hashing embedder the service is fully offline.
"""

from __future__ import annotations

import logging
import socket
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import evalbank
from .config import EngineConfig, build_engine
from .errors import (
    AskTmkError,
    PortInUse,
    StageError,
    UnratedRecord,
)
from .pipeline import Engine
from .tmk import Kind
from .trace import derive_trace, to_outline, trace_to_dict

logger = logging.getLogger("asktmk.service")

_STATUS_BY_CODE = {
    "EMPTY_QUESTION": 400,
    "EMPTY_TEXT": 400,
    "UNKNOWN_TASK": 404,
    "UNKNOWN_METHOD": 404,
    "UNRESOLVED_CHOICE": 400,
    "STEP_BOUND_EXCEEDED": 400,
    "MALFORMED_BANK": 400,
    "UNKNOWN_CATEGORY": 400,
    "UNRATED_RECORD": 409,
    "PROVIDER_UNAVAILABLE": 502,
    "PROVIDER_ERROR": 502,
    "BUDGET_EXCEEDED": 502,
}


class AskBody(BaseModel):
    question: str
    session_id: str | None = None
    k: int | None = Field(default=None, ge=1)


class TraceSelectors(BaseModel):
    methods: dict[str, str] | None = None  # task id -> method id
    paths: dict[str, str] | None = None    # state id -> condition label


class TraceBody(BaseModel):
    task_id: str
    bindings: dict[str, str] | None = None
    selectors: TraceSelectors | None = None
    step_bound: int = Field(default=1000, ge=1)


class EvalRunBody(BaseModel):
    bank_path: str | None = None
    ratings_path: str | None = None
    rater: str = "imported"


def create_app(engine: Engine, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="asktmk", version="0.1.0")
    app.state.engine = engine
    app.state.eval_records = None

    @app.middleware("http")
    async def request_id_middleware(request: Request, call_next):
        request_id = request.headers.get("x-request-id") or uuid.uuid4().hex
        request.state.request_id = request_id
        response = await call_next(request)
        response.headers["X-Request-ID"] = request_id
        logger.info("request_id=%s %s %s -> %s", request_id, request.method,
                    request.url.path, response.status_code)
        return response

    def error_response(request: Request, exc: AskTmkError, stage: str):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={
                "error": {"code": exc.code, "stage": stage, "message": exc.message},
                "request_id": getattr(request.state, "request_id", ""),
            },
        )

    @app.exception_handler(AskTmkError)
    async def asktmk_error_handler(request: Request, exc: AskTmkError):
        stage = exc.stage if isinstance(exc, StageError) else "request"
        return error_response(request, exc, stage)

    @app.get("/healthz")
    def healthz():
        model = engine.model
        return {
            "status": "ok",
            "agent_name": model.agent_name,
            "model_version": model.version,
            "counts": _counts(model),
        }

    @app.get("/model")
    def model_summary():
        model = engine.model
        top = model.top_level_task()
        return {
            "agent_name": model.agent_name,
            "version": model.version,
            "counts": _counts(model),
            "top_level_task": {"id": top.id, "name": top.name},
        }

    @app.post("/ask")
    def ask(body: AskBody):
        result = engine.ask(body.question, session=body.session_id, k=body.k)
        payload = result.as_dict()
        payload["session_id"] = body.session_id
        return payload

    @app.post("/trace")
    def trace(body: TraceBody):
        selectors = body.selectors or TraceSelectors()
        try:
            result = derive_trace(
                engine.model,
                body.task_id,
                bindings=body.bindings,
                method_selector=selectors.methods,
                path_selector=selectors.paths,
                step_bound=body.step_bound,
            )
        except AskTmkError as exc:
            raise StageError("trace", exc) from exc
        return {"outline": to_outline(result), "tree": trace_to_dict(result)}

    @app.post("/eval/run")
    def eval_run(body: EvalRunBody):
        try:
            bank = (evalbank.load_bank(body.bank_path) if body.bank_path
                    else evalbank.bundled_bank())
            records = evalbank.run_bank(bank, engine)
            if body.ratings_path:
                ratings = evalbank.load_ratings(body.ratings_path)
                records = evalbank.apply_ratings(records, ratings, rater=body.rater)
        except AskTmkError as exc:
            raise StageError("eval", exc) from exc
        app.state.eval_records = records
        return {
            "records": len(records),
            "failures": sum(1 for r in records if r.error),
            "rated": sum(1 for r in records if r.rating),
        }

    @app.get("/eval/report")
    def eval_report():
        records = app.state.eval_records
        if not records:
            raise StageError("eval", UnratedRecord("no evaluation run yet"))
        try:
            report = evalbank.aggregate(records)
        except AskTmkError as exc:
            raise StageError("eval", exc) from exc
        return {"report": report.as_dict(), "table": evalbank.render_report(report)}

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        # mounted last so the API routes above keep precedence
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _counts(model) -> dict:
    return {
        Kind.TASK.value: len(model.tasks),
        Kind.METHOD.value: len(model.methods),
        Kind.KNOWLEDGE.value: len(model.knowledge),
    }


def _check_port_free(host: str, port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((host, port))
        except OSError as exc:
            raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc


def serve(config: EngineConfig) -> None:
    """Validate the model, build the engine, and run the service.

    Fails fast: an invalid model raises InvalidModel before any socket is
    opened, and a busy port raises PortInUse.
    """
    import uvicorn

    engine = build_engine(config)
    app = create_app(engine, static_dir=config.static_dir)
    _check_port_free(config.host, config.port)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
