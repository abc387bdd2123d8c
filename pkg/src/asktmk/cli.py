"""Command-line front door.

Subcommands: validate, index, ask, trace, eval run, eval report, serve.
Exit code 0 on success; failures print a single line starting with the
error code and exit nonzero.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evalbank, retrieval
from .config import build_engine, resolve_config
from .errors import AskTmkError, InvalidModel
from .tmk import Kind, parse_model, render_documents, validate_source
from .trace import derive_trace, to_outline, trace_to_dict


def _fail(exc: AskTmkError) -> None:
    click.echo(f"{exc.code}: {exc.message}", err=True)
    sys.exit(1)


def _engine(model, provider_mode, k, config_file, port=None):
    cli_settings = {
        "model_path": model,
        "provider_mode": provider_mode,
        "k": k,
        "port": port,
    }
    config = resolve_config(cli=cli_settings, config_file=config_file)
    return config, build_engine(config)


@click.group()
def main():
    """Ask questions about how an agent works, grounded in its TMK self-model."""


@main.command("validate")
@click.argument("model_path", type=click.Path(exists=True))
def validate_cmd(model_path):
    """Parse and validate a model file; print ok or every violation."""
    try:
        report = validate_source(Path(model_path).read_bytes())
    except AskTmkError as exc:
        _fail(exc)
    if report.ok:
        click.echo("ok")
        return
    for issue in report.errors:
        click.echo(f"{issue.code} {issue.path}: {issue.message}")
    sys.exit(1)


@main.command("index")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--kinds", default="task,method,knowledge", show_default=True,
              help="Comma-separated document kinds to index.")
@click.option("--dimension", default=retrieval.DEFAULT_DIMENSION, show_default=True)
@click.option("--dump", "dump_path", type=click.Path(), default=None,
              help="Write the index as a text dump for debugging.")
def index_cmd(model_path, kinds, dimension, dump_path):
    """Render a model's documents and build the vector index."""
    try:
        model = parse_model(Path(model_path).read_bytes())
        kind_set = {Kind(k.strip()) for k in kinds.split(",") if k.strip()}
        docs = render_documents(model, kind_set)
        index = retrieval.build_index(docs, retrieval.HashingEmbedder(dimension))
    except (AskTmkError, ValueError) as exc:
        if isinstance(exc, AskTmkError):
            _fail(exc)
        click.echo(f"INVALID_KIND: {exc}", err=True)
        sys.exit(1)
    click.echo(f"indexed {len(index)} documents "
               f"(dimension {index.dimension}, embedder {index.embedder_id})")
    if dump_path:
        Path(dump_path).write_text(retrieval.dump_index(index), encoding="utf-8")
        click.echo(f"dump written to {dump_path}")


@main.command("ask")
@click.argument("question")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None,
              help="Model file (defaults to the bundled example model).")
@click.option("--mock", "provider_mode", flag_value="mock", default=None,
              help="Use the deterministic offline provider.")
@click.option("--remote", "provider_mode", flag_value="remote",
              help="Use the configured remote provider.")
@click.option("--k", type=int, default=None, help="Documents to retrieve.")
@click.option("--session-id", default=None)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True, help="Print the raw result object.")
def ask_cmd(question, model_path, provider_mode, k, session_id, config_file, as_json):
    """Answer a question: class, hits with scores, steps, final answer."""
    try:
        _, engine = _engine(model_path, provider_mode, k, config_file)
        result = engine.ask(question, session=session_id)
    except AskTmkError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps(result.as_dict(), indent=2, ensure_ascii=False))
        return
    click.echo(f"class: {result.question_class.value}")
    if result.hits:
        click.echo("hits:")
        for hit in result.hits:
            click.echo(f"  {hit.score:.4f}  {hit.kind.value:<9}  {hit.element_id}")
    if result.steps:
        click.echo("steps:")
        for n, step in enumerate(result.steps, start=1):
            click.echo(f"  {n}. {step}")
    click.echo(f"answer: {result.answer}")


@main.command("trace")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--task", "task_id", required=True)
@click.option("--binding", "bindings", multiple=True, metavar="CONCEPT=VALUE",
              help="Instance binding, repeatable.")
@click.option("--method-for", "method_selectors", multiple=True, metavar="TASK=METHOD",
              help="Method choice at a task, repeatable.")
@click.option("--choose", "path_selectors", multiple=True, metavar="STATE=LABEL",
              help="Transition choice at a state, repeatable.")
@click.option("--step-bound", type=int, default=1000, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the structured trace.")
def trace_cmd(model_path, task_id, bindings, method_selectors, path_selectors,
              step_bound, as_json):
    """Derive a symbolic trace of a task and print it as an outline."""

    def pairs(items, what):
        out = {}
        for item in items:
            if "=" not in item:
                raise click.BadParameter(f"{what} must look like key=value: '{item}'")
            key, value = item.split("=", 1)
            out[key] = value
        return out

    try:
        config = resolve_config(cli={"model_path": model_path})
        model = parse_model(Path(config.model_path).read_bytes())
        trace = derive_trace(
            model,
            task_id,
            bindings=pairs(bindings, "--binding"),
            method_selector=pairs(method_selectors, "--method-for"),
            path_selector=pairs(path_selectors, "--choose"),
            step_bound=step_bound,
        )
    except AskTmkError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps(trace_to_dict(trace), indent=2, ensure_ascii=False))
    else:
        click.echo(to_outline(trace), nl=False)


@main.group("eval")
def eval_group():
    """Run the question bank and aggregate rating reports."""


@eval_group.command("run")
@click.option("--bank", "bank_path", type=click.Path(exists=True), default=None,
              help="Bank file (defaults to the bundled 66-question bank).")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--mock", "provider_mode", flag_value="mock", default=None)
@click.option("--remote", "provider_mode", flag_value="remote")
@click.option("--ratings", "ratings_path", type=click.Path(exists=True), default=None)
@click.option("--rater", default="imported", show_default=True)
@click.option("--records", "records_path", type=click.Path(), default=None,
              help="Write the full run records as JSONL.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write <path>.json and <path>.txt report files.")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
def eval_run_cmd(bank_path, model_path, provider_mode, ratings_path, rater,
                 records_path, report_path, config_file):
    """Run every bank question through the engine; optionally rate and report."""
    try:
        _, engine = _engine(model_path, provider_mode, None, config_file)
        bank = evalbank.load_bank(bank_path) if bank_path else evalbank.bundled_bank()
        records = evalbank.run_bank(bank, engine)
        if ratings_path:
            ratings = evalbank.load_ratings(ratings_path)
            records = evalbank.apply_ratings(records, ratings, rater=rater)
    except AskTmkError as exc:
        _fail(exc)
    failures = sum(1 for r in records if r.error)
    click.echo(f"ran {len(records)} questions, {failures} failures")
    if records_path:
        Path(records_path).write_text(evalbank.records_to_jsonl(records), encoding="utf-8")
        click.echo(f"records written to {records_path}")
    if report_path:
        _write_report(records, report_path)


@eval_group.command("report")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--ratings", "ratings_path", type=click.Path(exists=True), default=None)
@click.option("--rater", default="imported", show_default=True)
@click.option("--out", "report_path", type=click.Path(), default=None)
def eval_report_cmd(records_path, ratings_path, rater, report_path):
    """Aggregate stored run records into the ratings report."""
    try:
        records = evalbank.records_from_jsonl(
            Path(records_path).read_text(encoding="utf-8"))
        if ratings_path:
            ratings = evalbank.load_ratings(ratings_path)
            records = evalbank.apply_ratings(records, ratings, rater=rater)
        if report_path:
            _write_report(records, report_path)
        else:
            report = evalbank.aggregate(records)
            click.echo(evalbank.render_report(report), nl=False)
    except AskTmkError as exc:
        _fail(exc)


def _write_report(records, report_path):
    report = evalbank.aggregate(records)
    table = evalbank.render_report(report)
    Path(f"{report_path}.json").write_text(
        json.dumps(report.as_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    Path(f"{report_path}.txt").write_text(table, encoding="utf-8")
    click.echo(table, nl=False)
    click.echo(f"report written to {report_path}.json and {report_path}.txt")


@main.command("serve")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--mock", "provider_mode", flag_value="mock", default=None)
@click.option("--remote", "provider_mode", flag_value="remote")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--k", type=int, default=None)
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None,
              help="Directory of built UI assets to serve at /.")
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
def serve_cmd(model_path, provider_mode, host, port, k, static_dir, config_file):
    """Start the HTTP service (fails fast on an invalid model)."""
    from .service import serve

    cli_settings = {
        "model_path": model_path,
        "provider_mode": provider_mode,
        "host": host,
        "port": port,
        "k": k,
        "static_dir": static_dir,
    }
    try:
        config = resolve_config(cli=cli_settings, config_file=config_file)
        serve(config)
    except InvalidModel as exc:
        for issue in exc.report.errors:
            click.echo(f"{issue.code} {issue.path}: {issue.message}", err=True)
        sys.exit(1)
    except AskTmkError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
