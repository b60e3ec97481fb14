"""Six-part questionnaire: schema loading, answer validation, plain-text rendering.

The schema config format is YAML (see data/default_questionnaire.yaml for the
bundled default). `load_schema` and `serialize_schema` round-trip.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace

import yaml

from .errors import SchemaConfigError

SECTION_NAMES = (
    "Introduction",
    "Understanding Data",
    "Evaluation",
    "Task Mechanism",
    "Constraints",
    "Miscellaneous",
)

ANSWER_KINDS = ("free_text", "single_choice", "multi_choice", "numeric", "boolean")
CHOICE_KINDS = ("single_choice", "multi_choice")

ANSWER_SOURCES = ("user", "smartfill", "smartfill_edited")

#: Questions carrying this tag are answered by the catalog-grounded Smart Fill call.
DATA_AVAILABILITY_TAG = "data_availability"

UNANSWERED = "UNANSWERED"


@dataclass(frozen=True)
class QuestionSpec:
    id: str
    section: str
    text: str
    answer_kind: str
    options: tuple[str, ...] = ()
    required: bool = False
    help_text: str | None = None
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class Section:
    name: str
    questions: tuple[QuestionSpec, ...]


@dataclass(frozen=True)
class QuestionnaireSchema:
    sections: tuple[Section, ...]

    def questions(self) -> list[QuestionSpec]:
        return [q for s in self.sections for q in s.questions]

    def question_map(self) -> dict[str, QuestionSpec]:
        return {q.id: q for q in self.questions()}

    def required_ids(self) -> set[str]:
        return {q.id for q in self.questions() if q.required}


@dataclass(frozen=True)
class Answer:
    question_id: str
    value: object
    source: str = "user"


@dataclass
class AnswerSet:
    answers: dict[str, Answer] = field(default_factory=dict)
    project_description: str = ""

    def with_answer(self, answer: Answer) -> "AnswerSet":
        merged = dict(self.answers)
        merged[answer.question_id] = answer
        return AnswerSet(answers=merged, project_description=self.project_description)


@dataclass(frozen=True)
class Finding:
    kind: str  # missing_required | type_mismatch | unknown_id
    question_id: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.findings

    @property
    def missing(self) -> set[str]:
        return {f.question_id for f in self.findings if f.kind == "missing_required"}

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def value_matches_kind(value: object, question: QuestionSpec) -> bool:
    """Type-check an answer value against the question's answer_kind."""
    kind = question.answer_kind
    if kind == "free_text":
        return isinstance(value, str)
    if kind == "single_choice":
        return isinstance(value, str) and value in question.options
    if kind == "multi_choice":
        return (
            isinstance(value, (list, tuple))
            and all(isinstance(v, str) for v in value)
            and set(value) <= set(question.options)
        )
    if kind == "numeric":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    return False


def _parse_question(raw: dict, section: str) -> QuestionSpec:
    if not isinstance(raw, dict):
        raise SchemaConfigError(f"question entry in section {section!r} must be a mapping")
    missing = {"id", "text", "answer_kind"} - set(raw)
    if missing:
        raise SchemaConfigError(f"question in section {section!r} missing keys: {sorted(missing)}")
    kind = raw["answer_kind"]
    if kind not in ANSWER_KINDS:
        raise SchemaConfigError(f"question {raw['id']!r}: unknown answer_kind {kind!r}")
    options = tuple(raw.get("options") or ())
    if kind in CHOICE_KINDS and not options:
        raise SchemaConfigError(f"choice question {raw['id']!r} has no options")
    if kind not in CHOICE_KINDS and options:
        raise SchemaConfigError(f"non-choice question {raw['id']!r} must not declare options")
    return QuestionSpec(
        id=str(raw["id"]),
        section=section,
        text=str(raw["text"]),
        answer_kind=kind,
        options=options,
        required=bool(raw.get("required", False)),
        help_text=raw.get("help_text"),
        tags=tuple(raw.get("tags") or ()),
    )


def load_schema(document: str) -> QuestionnaireSchema:
    """Parse a YAML schema config into a validated QuestionnaireSchema."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise SchemaConfigError(f"schema config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict) or "sections" not in data:
        raise SchemaConfigError("schema config must be a mapping with a 'sections' list")
    raw_sections = data["sections"]
    if not isinstance(raw_sections, list) or len(raw_sections) != len(SECTION_NAMES):
        raise SchemaConfigError(
            f"section count must be {len(SECTION_NAMES)}, got "
            f"{len(raw_sections) if isinstance(raw_sections, list) else 'non-list'}"
        )
    sections = []
    for idx, raw in enumerate(raw_sections):
        name = raw.get("name") if isinstance(raw, dict) else None
        if name != SECTION_NAMES[idx]:
            raise SchemaConfigError(
                f"section {idx + 1} must be named {SECTION_NAMES[idx]!r}, got {name!r}"
            )
        raw_questions = raw.get("questions") or []
        if not raw_questions:
            raise SchemaConfigError(f"section {name!r} must contain at least one question")
        questions = tuple(_parse_question(q, name) for q in raw_questions)
        sections.append(Section(name=name, questions=questions))
    schema = QuestionnaireSchema(sections=tuple(sections))
    seen: set[str] = set()
    for q in schema.questions():
        if q.id in seen:
            raise SchemaConfigError(f"duplicate question id {q.id!r}")
        seen.add(q.id)
    return schema


def serialize_schema(schema: QuestionnaireSchema) -> str:
    """Emit a YAML document that load_schema parses back to an equal schema."""
    sections = []
    for section in schema.sections:
        questions = []
        for q in section.questions:
            entry: dict = {"id": q.id, "text": q.text, "answer_kind": q.answer_kind}
            if q.options:
                entry["options"] = list(q.options)
            if q.required:
                entry["required"] = True
            if q.help_text is not None:
                entry["help_text"] = q.help_text
            if q.tags:
                entry["tags"] = list(q.tags)
            questions.append(entry)
        sections.append({"name": section.name, "questions": questions})
    return yaml.safe_dump({"sections": sections}, sort_keys=False, allow_unicode=True)


def default_schema() -> QuestionnaireSchema:
    """Load the bundled default questionnaire."""
    text = (
        importlib.resources.files("sciconsult.data")
        .joinpath("default_questionnaire.yaml")
        .read_text(encoding="utf-8")
    )
    return load_schema(text)


def validate_answers(schema: QuestionnaireSchema, answers: AnswerSet) -> ValidationReport:
    """Report missing required questions, type mismatches, and unknown ids."""
    report = ValidationReport()
    qmap = schema.question_map()
    for qid, answer in sorted(answers.answers.items()):
        question = qmap.get(qid)
        if question is None:
            report.findings.append(
                Finding("unknown_id", qid, f"answer references unknown question {qid!r}")
            )
            continue
        if not value_matches_kind(answer.value, question):
            report.findings.append(
                Finding(
                    "type_mismatch",
                    qid,
                    f"answer to {qid!r} does not match kind {question.answer_kind!r}",
                )
            )
    for qid in sorted(schema.required_ids()):
        if qid not in answers.answers:
            report.findings.append(
                Finding("missing_required", qid, f"required question {qid!r} unanswered")
            )
    return report


def render_value(value: object) -> str:
    """Deterministic plain-text rendering of an answer value."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def format_qa(schema: QuestionnaireSchema, answers: AnswerSet) -> str:
    """Render the questionnaire with answers as deterministic plain text.

    Sections appear in schema order; every question renders exactly once,
    unanswered ones as UNANSWERED.
    """
    lines: list[str] = []
    for section in schema.sections:
        lines.append(f"## {section.name}")
        for q in section.questions:
            answer = answers.answers.get(q.id)
            rendered = render_value(answer.value) if answer is not None else UNANSWERED
            lines.append(f"Q: {q.text}")
            lines.append(f"A: {rendered}")
        lines.append("")
    return "\n".join(lines)


def strip_sources(answers: AnswerSet) -> AnswerSet:
    """Copy with every answer's source reset to 'user' (used by import paths)."""
    return AnswerSet(
        answers={qid: replace(a, source="user") for qid, a in answers.answers.items()},
        project_description=answers.project_description,
    )
