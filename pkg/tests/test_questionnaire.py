import pytest

from sciconsult.errors import SchemaConfigError
from sciconsult.questionnaire import (
    SECTION_NAMES,
    UNANSWERED,
    Answer,
    AnswerSet,
    default_schema,
    format_qa,
    load_schema,
    serialize_schema,
    validate_answers,
)

MINIMAL_TEMPLATE = """
sections:
  - name: Introduction
    questions:
      - id: q1
        text: "Describe the task."
        answer_kind: free_text
        required: true
  - name: Understanding Data
    questions:
      - id: q2
        text: "Data available?"
        answer_kind: boolean
        tags: [data_availability]
  - name: Evaluation
    questions:
      - id: kpi
        text: "Which metric?"
        answer_kind: single_choice
        options: [accuracy, auc]
  - name: Task Mechanism
    questions:
      - id: q4
        text: "Needs tools?"
        answer_kind: boolean
  - name: Constraints
    questions:
      - id: q5
        text: "Latency budget in ms?"
        answer_kind: numeric
  - name: Miscellaneous
    questions:
      - id: q6
        text: "Anything else?"
        answer_kind: free_text
"""


def test_default_schema_has_six_sections_in_order():
    schema = default_schema()
    assert [s.name for s in schema.sections] == list(SECTION_NAMES)
    assert all(len(s.questions) >= 1 for s in schema.sections)
    n = len(schema.questions())
    assert 25 <= n <= 40


def test_load_schema_minimal():
    schema = load_schema(MINIMAL_TEMPLATE)
    assert len(schema.questions()) == 6
    assert schema.question_map()["kpi"].options == ("accuracy", "auc")


def test_five_sections_rejected():
    doc = MINIMAL_TEMPLATE.rsplit("  - name: Miscellaneous", 1)[0]
    with pytest.raises(SchemaConfigError, match="section count must be 6"):
        load_schema(doc)


def test_duplicate_question_id_rejected():
    doc = MINIMAL_TEMPLATE.replace("id: q6", "id: kpi")
    with pytest.raises(SchemaConfigError, match="duplicate question id"):
        load_schema(doc)


def test_choice_question_without_options_rejected():
    doc = MINIMAL_TEMPLATE.replace("        options: [accuracy, auc]\n", "")
    with pytest.raises(SchemaConfigError, match="no options"):
        load_schema(doc)


def test_wrong_section_name_rejected():
    doc = MINIMAL_TEMPLATE.replace("name: Constraints", "name: Limits")
    with pytest.raises(SchemaConfigError, match="must be named"):
        load_schema(doc)


def test_serialize_round_trip_is_fixed_point():
    schema = load_schema(MINIMAL_TEMPLATE)
    once = serialize_schema(schema)
    again = serialize_schema(load_schema(once))
    assert once == again
    assert load_schema(once) == schema


def test_default_schema_round_trips():
    schema = default_schema()
    assert load_schema(serialize_schema(schema)) == schema


def test_validate_empty_answers_missing_equals_required():
    schema = load_schema(MINIMAL_TEMPLATE)
    report = validate_answers(schema, AnswerSet())
    assert report.missing == schema.required_ids() == {"q1"}


def test_validate_complete_and_well_typed_is_empty():
    schema = load_schema(MINIMAL_TEMPLATE)
    answers = AnswerSet(
        answers={
            "q1": Answer("q1", "classify claims"),
            "q2": Answer("q2", True),
            "kpi": Answer("kpi", "auc"),
            "q4": Answer("q4", False),
            "q5": Answer("q5", 250),
            "q6": Answer("q6", "no"),
        }
    )
    assert validate_answers(schema, answers).empty


def test_validate_type_mismatch():
    schema = load_schema(MINIMAL_TEMPLATE)
    answers = AnswerSet(answers={"q5": Answer("q5", "fast")})
    report = validate_answers(schema, answers)
    mismatches = report.of_kind("type_mismatch")
    assert len(mismatches) == 1 and mismatches[0].question_id == "q5"


def test_validate_unknown_id():
    schema = load_schema(MINIMAL_TEMPLATE)
    answers = AnswerSet(answers={"ghost": Answer("ghost", "boo")})
    report = validate_answers(schema, answers)
    unknown = report.of_kind("unknown_id")
    assert len(unknown) == 1 and unknown[0].question_id == "ghost"


def test_validate_choice_value_outside_options_is_mismatch():
    schema = load_schema(MINIMAL_TEMPLATE)
    answers = AnswerSet(answers={"kpi": Answer("kpi", "latency")})
    assert len(validate_answers(schema, answers).of_kind("type_mismatch")) == 1


def test_format_qa_empty_answerset_renders_unanswered_everywhere():
    schema = load_schema(MINIMAL_TEMPLATE)
    text = format_qa(schema, AnswerSet())
    assert text.count(f"A: {UNANSWERED}") == 6
    for q in schema.questions():
        assert text.count(f"Q: {q.text}") == 1


def test_format_qa_single_answer_changes_one_line():
    schema = load_schema(MINIMAL_TEMPLATE)
    empty = format_qa(schema, AnswerSet())
    one = format_qa(schema, AnswerSet(answers={"kpi": Answer("kpi", "auc")}))
    diff = [
        (a, b) for a, b in zip(empty.splitlines(), one.splitlines()) if a != b
    ]
    assert diff == [(f"A: {UNANSWERED}", "A: auc")]


def test_format_qa_deterministic():
    schema = default_schema()
    answers = AnswerSet(answers={"kpis": Answer("kpis", "cost per claim")})
    assert format_qa(schema, answers) == format_qa(schema, answers)


def test_format_qa_sections_in_schema_order():
    schema = default_schema()
    text = format_qa(schema, AnswerSet())
    positions = [text.index(f"## {name}") for name in SECTION_NAMES]
    assert positions == sorted(positions)
