import json
import random

from sciconsult.data_template import (
    VIOLATION_CODES,
    DatasetSplit,
    load_split,
    parse_jsonl,
    serialize,
    validate_for_task,
)

# golden suite: one JSONL corpus exercising every appendix field and every
# violation code, annotated with the expected outcome per line
GOLDEN_LINES = [
    # (line, expected: "ok" | violation code | "blank")
    ('{"unique_id":"r1"}', "ok"),
    ('{"unique_id":"r2","input":{"text":"hello"}}', "ok"),
    ('{"unique_id":"r3","input":{"image_url":"file:///img.png"}}', "ok"),
    ('{"unique_id":"r4","input":{"audio_url":"file:///a.wav","video_url":"file:///v.mp4"}}', "ok"),
    ('{"unique_id":"r5","input":{"base64":"aGk="}}', "ok"),
    ('{"unique_id":"r6","input":{"numerical_features":{"x1":1.5,"x2":2}}}', "ok"),
    ('{"unique_id":"r7","input":{"categorical_features":{"color":"red"}}}', "ok"),
    ('{"unique_id":"r8","output":{"text":"eight"}}', "ok"),
    ('{"unique_id":"r9","output":{"numerical":9.0}}', "ok"),
    ('{"unique_id":"r10","output":{"categorical":"spam"}}', "ok"),
    ('{"unique_id":"r11","output":{"character_spans":{"start_char":0,"end_char":4}}}', "ok"),
    ('{"unique_id":"r12","input":{"text":"t","base64":"eA=="},"output":{"text":"y"}}', "ok"),
    ("", "blank"),
    ("   ", "blank"),
    ('{"unique_id":"r13","label":1}', "unknown_top_level_key"),
    ('{"unique_id":"r14","input":{"features":{}}}', "unknown_input_key"),
    ('{"unique_id":"r15","output":{"score":1}}', "unknown_output_key"),
    ('{"unique_id":"r16","output":{"character_spans":{"start_char":5,"end_char":2}}}', "invalid_span"),
    ('{"unique_id":"r17","input":{"numerical_features":{"x":"NaN"}}}', "field_type"),
    ('{"unique_id":"r18","input":{"numerical_features":{"x":1e999}}}', "non_finite_number"),
    ('{"unique_id":"r19","input":{"text":42}}', "field_type"),
    ('{"unique_id":""}', "missing_unique_id"),
    ('{"input":{"text":"orphan"}}', "missing_unique_id"),
    ('[1,2,3]', "not_an_object"),
    ('{"unique_id":"r1","input":{"text":"again"}}', "duplicate_unique_id"),
    ('{broken json', "invalid_json"),
]


def test_golden_suite_line_by_line():
    lines = [line for line, _ in GOLDEN_LINES]
    split, violations = parse_jsonl("\n".join(lines) + "\n", "train")
    expected_ok = [i + 1 for i, (_, tag) in enumerate(GOLDEN_LINES) if tag == "ok"]
    expected_violations = {
        i + 1: tag
        for i, (_, tag) in enumerate(GOLDEN_LINES)
        if tag not in ("ok", "blank")
    }
    assert len(split.records) == len(expected_ok)
    got = {v.line_number: v.code for v in violations}
    assert got == expected_violations
    # exactly one violation per invalid line
    assert len(violations) == len(expected_violations)


def test_golden_suite_covers_every_violation_code():
    tags = {tag for _, tag in GOLDEN_LINES if tag not in ("ok", "blank")}
    assert tags == set(VIOLATION_CODES) - {"line_too_long"}


def test_line_too_long_guard():
    big = json.dumps({"unique_id": "big", "input": {"base64": "A" * (10 * 1024 * 1024)}})
    _, violations = parse_jsonl(big + "\n", "train")
    assert [v.code for v in violations] == ["line_too_long"]


def test_minimal_record_all_fields_optional():
    split, violations = parse_jsonl('{"unique_id":"r1"}\n', "train")
    assert not violations
    assert split.records[0].unique_id == "r1"
    assert split.records[0].input is None and split.records[0].output is None


def test_duplicate_keeps_first():
    text = '{"unique_id":"d","output":{"numerical":1}}\n{"unique_id":"d","output":{"numerical":2}}\n'
    split, violations = parse_jsonl(text, "train")
    assert len(split.records) == 1
    assert split.records[0].output.numerical == 1.0
    assert violations[0].code == "duplicate_unique_id"


def random_corpus(rng):
    lines = []
    for i in range(rng.randint(1, 60)):
        roll = rng.random()
        if roll < 0.15:
            lines.append("")
        elif roll < 0.3:
            lines.append("not json at all {")
        elif roll < 0.4:
            lines.append(json.dumps({"unique_id": f"u{i}", "bogus": 1}))
        else:
            lines.append(
                json.dumps(
                    {
                        "unique_id": f"u{i}",
                        "input": {"numerical_features": {"x": rng.random()}},
                        "output": {"numerical": rng.random()},
                    }
                )
            )
    return lines


def test_count_conservation_on_random_corpora():
    rng = random.Random(4242)
    for _ in range(50):
        lines = random_corpus(rng)
        split, violations = parse_jsonl("\n".join(lines) + "\n", "train")
        blanks = sum(1 for line in lines if not line.strip())
        assert len(split.records) + len(violations) + blanks == len(lines)


def test_serialize_parse_round_trip_exact():
    text = "\n".join(line for line, tag in GOLDEN_LINES if tag == "ok") + "\n"
    split, violations = parse_jsonl(text, "validation")
    assert not violations
    rebuilt, violations2 = parse_jsonl(serialize(split), "validation")
    assert not violations2
    assert rebuilt.records == split.records
    # serialize is itself a fixed point
    assert serialize(rebuilt) == serialize(split)


def tabular_split(rows, role="train"):
    records = []
    for uid, feats, label in rows:
        records.append(
            {
                "unique_id": uid,
                "input": {"numerical_features": feats},
                "output": {"categorical": label} if isinstance(label, str) else {"numerical": label},
            }
        )
    text = "\n".join(json.dumps(r) for r in records) + "\n"
    split, violations = parse_jsonl(text, role)
    assert not violations
    return split


def test_validate_regression_conforming():
    split = tabular_split(
        [("a", {"x1": 1, "x2": 2}, 1.0), ("b", {"x1": 3, "x2": 4}, 2.0), ("c", {"x1": 0, "x2": 0}, 0.5)]
    )
    assert validate_for_task(split, "regression").empty


def test_validate_inconsistent_feature_set_names_the_odd_record():
    split = tabular_split(
        [("a", {"x1": 1, "x2": 2}, 1.0), ("b", {"x1": 3}, 2.0), ("c", {"x1": 0, "x2": 1}, 3.0)]
    )
    report = validate_for_task(split, "regression")
    codes = [(f.code, f.record_id) for f in report.findings]
    assert ("inconsistent_feature_set", "b") in codes


def test_validate_binary_label_cardinality():
    split = tabular_split(
        [("a", {"x": 1}, "a"), ("b", {"x": 2}, "b"), ("c", {"x": 3}, "c")]
    )
    report = validate_for_task(split, "binary_classification")
    assert any(f.code == "label_cardinality" for f in report.findings)


def test_validate_findings_order_insensitive():
    rows = [
        ("a", {"x1": 1, "x2": 2}, 1.0),
        ("b", {"x1": 3}, 2.0),
        ("c", {"x1": 0, "x2": 1}, 3.0),
    ]
    forward = validate_for_task(tabular_split(rows), "regression")
    backward = validate_for_task(tabular_split(rows[::-1]), "regression")
    key = lambda f: (f.code, f.record_id)
    assert sorted(map(key, forward.findings)) == sorted(map(key, backward.findings))


def test_validate_text_generation():
    records = [
        {"unique_id": "a", "input": {"text": "q1"}, "output": {"text": "a1"}},
        {"unique_id": "b", "input": {"text": "q2"}},
    ]
    text = "\n".join(json.dumps(r) for r in records) + "\n"
    train, _ = parse_jsonl(text, "train")
    report = validate_for_task(train, "text_generation")
    assert [(f.code, f.record_id) for f in report.findings] == [("missing_output", "b")]
    test_split, _ = parse_jsonl(text, "test")
    assert validate_for_task(test_split, "text_generation").empty


def test_validate_missing_output_regression():
    records = [
        {"unique_id": "a", "input": {"numerical_features": {"x": 1}}},
    ]
    split, _ = parse_jsonl(json.dumps(records[0]) + "\n", "train")
    report = validate_for_task(split, "regression")
    assert [f.code for f in report.findings] == ["missing_output"]


def test_empty_split_serializes_to_empty():
    assert serialize(DatasetSplit(role="train")) == ""


def test_load_split_accepts_relative_paths(tmp_path, monkeypatch):
    (tmp_path / "test.jsonl").write_text('{"unique_id":"a"}\n', encoding="utf-8")
    monkeypatch.chdir(tmp_path)
    split, violations = load_split("test.jsonl", "test")
    assert violations == []
    assert [r.unique_id for r in split.records] == ["a"]
    assert split.source_uri == (tmp_path / "test.jsonl").resolve().as_uri()
