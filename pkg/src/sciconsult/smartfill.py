"""Smart Fill: auto-complete questionnaire answers from the project description.

Two-step flow. `discover_datasets` ranks catalog entries against the project
description with a deterministic lexical score (optional LLM re-rank), and
`suggest_answers` drafts answers for unanswered questions via structured
gateway calls, grounding data-availability questions in the catalog. Nothing
is committed until `apply_suggestions` runs over the human-reviewed set.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import CatalogError, SmartFillPartialError, StructuredOutputError
from .gateway import ChatRequest, LlmGateway
from .questionnaire import (
    DATA_AVAILABILITY_TAG,
    Answer,
    AnswerSet,
    QuestionnaireSchema,
    QuestionSpec,
    value_matches_kind,
)

CATALOG_VERSION = 1

COLUMN_KINDS = ("numerical", "categorical", "text", "binary_uri")

PROVENANCE_INTERNAL = "internal_knowledge"
PROVENANCE_CATALOG = "catalog"
PROVENANCES = (PROVENANCE_INTERNAL, PROVENANCE_CATALOG)

DEFAULT_TOP_M = 5

_TOKEN_RE = re.compile(r"[a-z0-9]+")

GENERAL_SYSTEM_TEXT = (
    "You are helping a scientist fill in a machine learning project"
    " questionnaire. Based on the project description, propose answers for"
    " the listed questions. Respect each question's answer kind: free_text"
    " answers are strings, numeric answers are numbers, boolean answers are"
    " true/false, and choice answers must use the listed options verbatim"
    " (multi_choice as an array). Skip any question the description gives"
    " you no basis to answer. Reply as JSON."
)

DATA_SYSTEM_TEXT = (
    "You are helping a scientist fill in the data-availability part of a"
    " machine learning project questionnaire. A catalog excerpt of possibly"
    " relevant datasets is provided; ground every answer in those entries"
    " and list the entry names you relied on in dataset_names. Respect each"
    " question's answer kind. Skip any question the catalog gives you no"
    " basis to answer. Reply as JSON."
)

RERANK_SYSTEM_TEXT = (
    "Rank the candidate datasets from most to least relevant to the project"
    " description. Reply as JSON with ranked_names, using the names exactly"
    " as given."
)

_SUGGESTION_FIELDS = {
    "question_id": {"type": "string"},
    "value": {},
    "rationale": {"type": "string"},
}

GENERAL_SUGGESTIONS_SCHEMA = {
    "type": "object",
    "properties": {
        "suggestions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": dict(_SUGGESTION_FIELDS),
                "required": ["question_id", "value"],
            },
        }
    },
    "required": ["suggestions"],
}

DATA_SUGGESTIONS_SCHEMA = {
    "type": "object",
    "properties": {
        "suggestions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    **_SUGGESTION_FIELDS,
                    "dataset_names": {"type": "array", "items": {"type": "string"}},
                },
                "required": ["question_id", "value"],
            },
        }
    },
    "required": ["suggestions"],
}

RERANK_SCHEMA = {
    "type": "object",
    "properties": {"ranked_names": {"type": "array", "items": {"type": "string"}}},
    "required": ["ranked_names"],
}


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    declared_kind: str

    def __post_init__(self):
        if self.declared_kind not in COLUMN_KINDS:
            raise ValueError(
                f"column {self.name!r}: unknown declared_kind {self.declared_kind!r}"
            )


@dataclass(frozen=True)
class DatasetCatalogEntry:
    name: str
    description: str
    columns: tuple[ColumnSpec, ...] = ()
    row_count: int = 0
    location_uri: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("catalog entry name must be non-empty")
        if self.row_count < 0:
            raise ValueError(f"catalog entry {self.name!r}: row_count must be >= 0")


@dataclass(frozen=True)
class SmartFillSuggestion:
    question_id: str
    proposed_value: object
    provenance: str
    catalog_entries: tuple[str, ...] = ()
    rationale: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == PROVENANCE_CATALOG and not self.catalog_entries:
            raise ValueError(
                f"suggestion for {self.question_id!r}: catalog provenance "
                "requires at least one entry name"
            )
        if self.provenance == PROVENANCE_INTERNAL and self.catalog_entries:
            raise ValueError(
                f"suggestion for {self.question_id!r}: internal_knowledge "
                "provenance must not list catalog entries"
            )


def parse_catalog(document: str) -> list[DatasetCatalogEntry]:
    """Parse a JSON-lines dataset catalog.

    The first non-blank line must be a version header object, e.g.
    {"catalog_version": 1}; each following line is one entry.
    """
    lines = [
        (idx, line)
        for idx, line in enumerate(document.splitlines(), start=1)
        if line.strip()
    ]
    if not lines:
        raise CatalogError("catalog is empty; expected a version header line")
    header_no, header_line = lines[0]
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"line {header_no}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "catalog_version" not in header:
        raise CatalogError(f"line {header_no}: missing catalog_version header")
    if header["catalog_version"] != CATALOG_VERSION:
        raise CatalogError(
            f"unsupported catalog_version {header['catalog_version']!r}; "
            f"expected {CATALOG_VERSION}"
        )
    entries: list[DatasetCatalogEntry] = []
    seen: set[str] = set()
    for line_no, line in lines[1:]:
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"line {line_no}: not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise CatalogError(f"line {line_no}: entry must be a JSON object")
        missing = {"name", "description"} - set(raw)
        if missing:
            raise CatalogError(f"line {line_no}: entry missing keys: {sorted(missing)}")
        try:
            entry = DatasetCatalogEntry(
                name=str(raw["name"]),
                description=str(raw["description"]),
                columns=tuple(
                    ColumnSpec(name=str(c["name"]), declared_kind=str(c["declared_kind"]))
                    for c in raw.get("columns") or ()
                ),
                row_count=int(raw.get("row_count", 0)),
                location_uri=str(raw.get("location_uri", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"line {line_no}: {exc}") from exc
        if entry.name in seen:
            raise CatalogError(f"line {line_no}: duplicate entry name {entry.name!r}")
        seen.add(entry.name)
        entries.append(entry)
    return entries


def load_catalog(path: str | Path) -> list[DatasetCatalogEntry]:
    return parse_catalog(Path(path).read_text(encoding="utf-8"))


def write_catalog(path: str | Path, entries: list[DatasetCatalogEntry]) -> None:
    """Write entries as JSON-lines under a version header; load_catalog inverts."""
    lines = [json.dumps({"catalog_version": CATALOG_VERSION})]
    for entry in entries:
        lines.append(
            json.dumps(
                {
                    "name": entry.name,
                    "description": entry.description,
                    "columns": [
                        {"name": c.name, "declared_kind": c.declared_kind}
                        for c in entry.columns
                    ],
                    "row_count": entry.row_count,
                    "location_uri": entry.location_uri,
                },
                ensure_ascii=False,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _tokens(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def _entry_tokens(entry: DatasetCatalogEntry) -> set[str]:
    parts = [entry.name, entry.description]
    parts.extend(c.name for c in entry.columns)
    return _tokens(" ".join(parts))


def lexical_score(project_description: str, entry: DatasetCatalogEntry) -> float:
    """Jaccard overlap between description tokens and entry tokens, in [0, 1].

    Entry tokens come from the name, description, and column names.
    """
    desc = _tokens(project_description)
    ent = _entry_tokens(entry)
    union = desc | ent
    if not union:
        return 0.0
    return len(desc & ent) / len(union)


def discover_datasets(
    project_description: str,
    catalog: list[DatasetCatalogEntry],
    top_m: int = DEFAULT_TOP_M,
    gateway: LlmGateway | None = None,
) -> list[tuple[DatasetCatalogEntry, float]]:
    """Rank catalog entries by relevance to the project description.

    Deterministic lexical pre-rank (descending score, ties broken by name);
    when a gateway is given, one structured call re-orders the top_m slice,
    keeping the lexical scores attached.
    """
    if top_m < 1:
        raise ValueError("top_m must be >= 1")
    if not catalog:
        return []
    scored = [(entry, lexical_score(project_description, entry)) for entry in catalog]
    scored.sort(key=lambda pair: (-pair[1], pair[0].name))
    ranked = scored[:top_m]
    if gateway is None or len(ranked) < 2:
        return ranked
    listing = "\n".join(
        f"- {entry.name}: {entry.description}" for entry, _ in ranked
    )
    request = ChatRequest(
        system_text=RERANK_SYSTEM_TEXT,
        user_text=(
            f"Project description:\n{project_description}\n\n"
            f"Candidate datasets:\n{listing}"
        ),
        output_schema=RERANK_SCHEMA,
        max_output_tokens=1024,
    )
    reply = gateway.complete_structured(request)
    by_name = {entry.name: (entry, score) for entry, score in ranked}
    reordered: list[tuple[DatasetCatalogEntry, float]] = []
    for name in reply["ranked_names"]:
        pair = by_name.pop(name, None)
        if pair is not None:
            reordered.append(pair)
    for entry, score in ranked:
        if entry.name in by_name:
            reordered.append(by_name.pop(entry.name))
    return reordered


def _question_block(question: QuestionSpec) -> str:
    lines = [
        f"- id: {question.id}",
        f"  question: {question.text}",
        f"  kind: {question.answer_kind}",
    ]
    if question.options:
        lines.append(f"  options: {', '.join(question.options)}")
    return "\n".join(lines)


def _entry_block(entry: DatasetCatalogEntry) -> str:
    cols = ", ".join(f"{c.name} ({c.declared_kind})" for c in entry.columns)
    return (
        f"- name: {entry.name}\n"
        f"  description: {entry.description}\n"
        f"  columns: {cols or '(none declared)'}\n"
        f"  row_count: {entry.row_count}"
    )


def _normalize_value(value: object) -> object:
    if isinstance(value, list):
        return tuple(value)
    return value


def _collect_proposals(
    reply: dict,
    targets: dict[str, QuestionSpec],
    provenance: str,
    discovered_names: tuple[str, ...] = (),
) -> list[SmartFillSuggestion]:
    """Filter one structured reply down to well-typed, in-scope suggestions.

    Drops proposals for unknown or already-answered questions and proposals
    whose value does not match the question's answer kind. First proposal
    per question wins.
    """
    suggestions: list[SmartFillSuggestion] = []
    taken: set[str] = set()
    for item in reply.get("suggestions", []):
        qid = item["question_id"]
        question = targets.get(qid)
        if question is None or qid in taken:
            continue
        value = _normalize_value(item["value"])
        if not value_matches_kind(value, question):
            continue
        if provenance == PROVENANCE_CATALOG:
            named = tuple(
                n for n in item.get("dataset_names", []) if n in discovered_names
            )
            entries = named or discovered_names
        else:
            entries = ()
        suggestions.append(
            SmartFillSuggestion(
                question_id=qid,
                proposed_value=value,
                provenance=provenance,
                catalog_entries=entries,
                rationale=str(item.get("rationale", "")),
            )
        )
        taken.add(qid)
    return suggestions


def suggest_answers(
    schema: QuestionnaireSchema,
    answers: AnswerSet,
    catalog: list[DatasetCatalogEntry],
    gateway: LlmGateway,
    top_m: int = DEFAULT_TOP_M,
) -> list[SmartFillSuggestion]:
    """Draft suggestions for every question the user has not answered yet.

    One structured call covers general questions from the project
    description alone; a second covers data-availability questions with the
    discover_datasets shortlist embedded in the prompt. Existing answers are
    never overwritten. If a call fails after partial progress, the error
    carries the suggestions gathered so far.
    """
    if not answers.project_description.strip():
        raise ValueError("suggest_answers requires a non-empty project_description")
    unanswered = [q for q in schema.questions() if q.id not in answers.answers]
    general = {q.id: q for q in unanswered if DATA_AVAILABILITY_TAG not in q.tags}
    data = {q.id: q for q in unanswered if DATA_AVAILABILITY_TAG in q.tags}
    collected: list[SmartFillSuggestion] = []
    if general:
        request = ChatRequest(
            system_text=GENERAL_SYSTEM_TEXT,
            user_text=(
                f"Project description:\n{answers.project_description}\n\n"
                "Questions:\n"
                + "\n".join(_question_block(q) for q in general.values())
            ),
            output_schema=GENERAL_SUGGESTIONS_SCHEMA,
        )
        try:
            reply = gateway.complete_structured(request)
        except StructuredOutputError as exc:
            raise SmartFillPartialError(
                f"smart fill general call failed: {exc}", suggestions=[]
            ) from exc
        collected.extend(_collect_proposals(reply, general, PROVENANCE_INTERNAL))
    discovered = (
        discover_datasets(answers.project_description, catalog, top_m=top_m)
        if data and catalog
        else []
    )
    if data and discovered:
        names = tuple(entry.name for entry, _ in discovered)
        request = ChatRequest(
            system_text=DATA_SYSTEM_TEXT,
            user_text=(
                f"Project description:\n{answers.project_description}\n\n"
                "Dataset catalog excerpt:\n"
                + "\n".join(_entry_block(entry) for entry, _ in discovered)
                + "\n\nQuestions:\n"
                + "\n".join(_question_block(q) for q in data.values())
            ),
            output_schema=DATA_SUGGESTIONS_SCHEMA,
        )
        try:
            reply = gateway.complete_structured(request)
        except StructuredOutputError as exc:
            raise SmartFillPartialError(
                f"smart fill data-availability call failed: {exc}",
                suggestions=collected,
            ) from exc
        collected.extend(
            _collect_proposals(reply, data, PROVENANCE_CATALOG, discovered_names=names)
        )
    by_id = {s.question_id: s for s in collected}
    return [by_id[q.id] for q in schema.questions() if q.id in by_id]


def apply_suggestions(
    schema: QuestionnaireSchema,
    answers: AnswerSet,
    accepted: list[SmartFillSuggestion],
    edits: dict[str, object] | None = None,
) -> AnswerSet:
    """Commit reviewed suggestions into a new AnswerSet.

    Accepted suggestions land with source "smartfill"; an edit that changes
    the proposed value lands as "smartfill_edited". Questions outside the
    accepted list are left untouched, and stray edit keys are ignored.
    """
    edits = edits or {}
    qmap = schema.question_map()
    merged = dict(answers.answers)
    for suggestion in accepted:
        qid = suggestion.question_id
        question = qmap.get(qid)
        if question is None:
            raise ValueError(f"accepted suggestion references unknown question {qid!r}")
        value = suggestion.proposed_value
        source = "smartfill"
        if qid in edits:
            edited = _normalize_value(edits[qid])
            if edited != value:
                value = edited
                source = "smartfill_edited"
        if not value_matches_kind(value, question):
            raise TypeError(
                f"value for question {qid!r} does not match kind "
                f"{question.answer_kind!r}"
            )
        merged[qid] = Answer(question_id=qid, value=value, source=source)
    return AnswerSet(answers=merged, project_description=answers.project_description)
