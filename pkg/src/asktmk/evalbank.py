"""Question bank, bank runs, ratings, and aggregate reports.

The bundled bank holds 66 questions across seven categories. Ratings
(High/Medium/Low on recall, precision, accuracy) are human or imported
input; this module stores and aggregates them, it never judges answers.
Each bank question runs in a fresh session, since the bank is built from
non-context-dependent questions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import AskTmkError, MalformedBank, UnknownCategory, UnratedRecord
from .pipeline import Engine, ExplanationResult

METRICS = ("recall", "precision", "accuracy")


class Category(str, Enum):
    INPUT = "input"
    OUTPUT = "output"
    HOW_GLOBAL = "how_global"
    WHY_NOT = "why_not"
    OTHERS = "others"
    OTHERS_CONTEXT = "others_context"
    AGENT_SPECIFIC = "agent_specific"


class Level(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


@dataclass(frozen=True)
class BankQuestion:
    id: str
    category: Category
    example_text: str
    adapted_text: str
    authored: bool = False


@dataclass(frozen=True)
class Rating:
    recall: Level
    precision: Level
    accuracy: Level
    justification: str = ""


@dataclass(frozen=True)
class EvalRecord:
    question: BankQuestion
    result: ExplanationResult | None = None
    error: str | None = None
    rating: Rating | None = None
    rater: str = ""


# --- loading -----------------------------------------------------------------


def parse_bank(text: str) -> list[BankQuestion]:
    """Parse a line-delimited JSON question bank."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MalformedBank("bank file is empty")
    questions: list[BankQuestion] = []
    seen: set[str] = set()
    for n, line in enumerate(lines, start=1):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedBank(f"line {n}: not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise MalformedBank(f"line {n}: expected an object")
        try:
            qid = raw["id"]
            category_raw = raw["category"]
            example = raw["example_text"]
            adapted = raw["adapted_text"]
        except KeyError as exc:
            raise MalformedBank(f"line {n}: missing field {exc}") from exc
        try:
            category = Category(category_raw)
        except ValueError:
            raise UnknownCategory(f"line {n}: unknown category '{category_raw}'") from None
        if not isinstance(adapted, str) or not adapted.strip():
            raise MalformedBank(f"line {n}: adapted_text must be non-empty")
        if qid in seen:
            raise MalformedBank(f"line {n}: duplicate question id '{qid}'")
        seen.add(qid)
        questions.append(BankQuestion(
            id=qid,
            category=category,
            example_text=example,
            adapted_text=adapted,
            authored=bool(raw.get("authored", False)),
        ))
    return questions


def load_bank(path: str | Path) -> list[BankQuestion]:
    return parse_bank(Path(path).read_text(encoding="utf-8"))


def bundled_bank() -> list[BankQuestion]:
    text = resources.files("asktmk").joinpath("data/bank.jsonl").read_text(encoding="utf-8")
    return parse_bank(text)


def parse_ratings(text: str) -> dict[str, Rating]:
    """Parse a ratings file: a JSON object keyed by question id."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedBank(f"ratings file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedBank("ratings file must be a JSON object keyed by question id")
    ratings: dict[str, Rating] = {}
    for qid, entry in raw.items():
        try:
            ratings[qid] = Rating(
                recall=Level(entry["recall"]),
                precision=Level(entry["precision"]),
                accuracy=Level(entry["accuracy"]),
                justification=entry.get("justification", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedBank(f"rating for '{qid}' is malformed: {exc}") from exc
    return ratings


def load_ratings(path: str | Path) -> dict[str, Rating]:
    return parse_ratings(Path(path).read_text(encoding="utf-8"))


def bundled_published_ratings() -> dict[str, Rating]:
    """The published expert ratings for the bundled bank."""
    text = resources.files("asktmk").joinpath(
        "data/published_ratings.json").read_text(encoding="utf-8")
    return parse_ratings(text)


# --- running ---------------------------------------------------------------------


def run_bank(bank: list[BankQuestion], engine: Engine) -> list[EvalRecord]:
    """Run every bank question through the engine, one fresh session each.

    Per-question failures are recorded on the record and the run continues.
    """
    records: list[EvalRecord] = []
    for question in bank:
        try:
            result = engine.ask(question.adapted_text, session=None)
            records.append(EvalRecord(question=question, result=result))
        except AskTmkError as exc:
            records.append(EvalRecord(question=question, error=f"{exc.code}: {exc.message}"))
    return records


def apply_ratings(records: list[EvalRecord], ratings: dict[str, Rating],
                  rater: str = "imported") -> list[EvalRecord]:
    return [
        replace(r, rating=ratings[r.question.id], rater=rater)
        if r.question.id in ratings else r
        for r in records
    ]


# --- aggregation -------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateReport:
    total: int
    category_counts: dict  # category -> question count
    cells: dict            # category -> metric -> level -> count
    totals: dict           # metric -> level -> count

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "category_counts": {c: n for c, n in self.category_counts.items()},
            "cells": self.cells,
            "totals": self.totals,
        }


def aggregate(records: list[EvalRecord]) -> AggregateReport:
    """Tally rating levels per (category, metric). Every record must be rated."""
    for record in records:
        if record.rating is None:
            raise UnratedRecord(record.question.id)
    category_counts = {c.value: 0 for c in Category}
    cells = {
        c.value: {m: {lv.value: 0 for lv in Level} for m in METRICS} for c in Category
    }
    totals = {m: {lv.value: 0 for lv in Level} for m in METRICS}
    for record in records:
        cat = record.question.category.value
        category_counts[cat] += 1
        for metric in METRICS:
            level = getattr(record.rating, metric).value
            cells[cat][metric][level] += 1
            totals[metric][level] += 1
    return AggregateReport(
        total=len(records),
        category_counts=category_counts,
        cells=cells,
        totals=totals,
    )


def _tally(counts: dict) -> str:
    parts = [f"{lv.value} - {counts[lv.value]}" for lv in Level if counts[lv.value]]
    return ", ".join(parts) if parts else "-"


def render_report(report: AggregateReport) -> str:
    """Aligned-text table: one row per category with per-metric tallies."""
    headers = ["Category", "Questions", "Recall", "Precision", "Accuracy"]
    rows = [headers]
    for category in Category:
        cat = category.value
        if report.category_counts[cat] == 0 and report.total:
            continue
        rows.append([
            cat,
            str(report.category_counts[cat]),
            _tally(report.cells[cat]["recall"]),
            _tally(report.cells[cat]["precision"]),
            _tally(report.cells[cat]["accuracy"]),
        ])
    rows.append([
        "total",
        str(report.total),
        _tally(report.totals["recall"]),
        _tally(report.totals["precision"]),
        _tally(report.totals["accuracy"]),
    ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = []
    for n, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# --- record persistence -----------------------------------------------------------


def records_to_jsonl(records: list[EvalRecord]) -> str:
    lines = []
    for r in records:
        entry = {
            "question": {
                "id": r.question.id,
                "category": r.question.category.value,
                "example_text": r.question.example_text,
                "adapted_text": r.question.adapted_text,
                "authored": r.question.authored,
            },
            "result": r.result.as_dict() if r.result else None,
            "error": r.error,
            "rating": None,
            "rater": r.rater,
        }
        if r.rating:
            entry["rating"] = {
                "recall": r.rating.recall.value,
                "precision": r.rating.precision.value,
                "accuracy": r.rating.accuracy.value,
                "justification": r.rating.justification,
            }
        lines.append(json.dumps(entry, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def records_from_jsonl(text: str) -> list[EvalRecord]:
    from .pipeline import QuestionClass
    from .retrieval import RetrievalHit
    from .tmk import Kind

    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        q = raw["question"]
        question = BankQuestion(
            id=q["id"], category=Category(q["category"]),
            example_text=q["example_text"], adapted_text=q["adapted_text"],
            authored=q.get("authored", False),
        )
        result = None
        if raw.get("result"):
            res = raw["result"]
            result = ExplanationResult(
                question=res["question"],
                question_class=QuestionClass(res["class"]),
                hits=tuple(
                    RetrievalHit(h["element_id"], Kind(h["kind"]), h["score"])
                    for h in res["hits"]
                ),
                steps=tuple(res["steps"]),
                answer=res["answer"],
                metadata=res["metadata"],
            )
        rating = None
        if raw.get("rating"):
            rt = raw["rating"]
            rating = Rating(Level(rt["recall"]), Level(rt["precision"]),
                            Level(rt["accuracy"]), rt.get("justification", ""))
        records.append(EvalRecord(question=question, result=result,
                                  error=raw.get("error"), rating=rating,
                                  rater=raw.get("rater", "")))
    return records
