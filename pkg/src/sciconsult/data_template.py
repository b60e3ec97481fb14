"""Unified data template: fixed-key JSONL records for train/validation/test splits.

Top-level keys are fixed to {unique_id, input, output}; user-defined keys are
only allowed inside the two feature maps. Parsing is streaming and per-line:
each physical line ends up in exactly one of {valid record, violation, blank}.
"""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

TOP_LEVEL_KEYS = ("unique_id", "input", "output")
INPUT_KEYS = (
    "text",
    "image_url",
    "audio_url",
    "video_url",
    "base64",
    "numerical_features",
    "categorical_features",
)
OUTPUT_KEYS = ("text", "numerical", "categorical", "character_spans")
SPAN_KEYS = ("start_char", "end_char")

SPLIT_ROLES = ("train", "validation", "test")
TASK_KINDS = (
    "regression",
    "binary_classification",
    "multiclass_classification",
    "text_generation",
)
TABULAR_TASKS = ("regression", "binary_classification", "multiclass_classification")

MAX_LINE_BYTES = 10 * 1024 * 1024

# every code parse_jsonl can emit
VIOLATION_CODES = (
    "line_too_long",
    "invalid_json",
    "not_an_object",
    "missing_unique_id",
    "unknown_top_level_key",
    "unknown_input_key",
    "unknown_output_key",
    "field_type",
    "non_finite_number",
    "invalid_span",
    "duplicate_unique_id",
)


@dataclass(frozen=True)
class CharacterSpan:
    start_char: int
    end_char: int


@dataclass(frozen=True)
class RecordInput:
    text: str | None = None
    image_url: str | None = None
    audio_url: str | None = None
    video_url: str | None = None
    base64: str | None = None
    numerical_features: dict[str, float] | None = None
    categorical_features: dict[str, str] | None = None


@dataclass(frozen=True)
class RecordOutput:
    text: str | None = None
    numerical: float | None = None
    categorical: str | None = None
    character_spans: CharacterSpan | None = None


@dataclass(frozen=True)
class DataRecord:
    unique_id: str
    input: RecordInput | None = None
    output: RecordOutput | None = None


@dataclass
class DatasetSplit:
    role: str
    records: list[DataRecord] = field(default_factory=list)
    source_uri: str = ""


@dataclass(frozen=True)
class TemplateViolation:
    line_number: int
    code: str
    message: str
    record_id: str | None = None


class _LineError(Exception):
    def __init__(self, code: str, message: str, record_id: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.record_id = record_id


def _require_str(value, name: str, record_id: str | None):
    if not isinstance(value, str):
        raise _LineError("field_type", f"{name} must be a string", record_id)
    return value


def _check_number(value, name: str, record_id: str | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _LineError("field_type", f"{name} must be a number", record_id)
    if not math.isfinite(value):
        raise _LineError("non_finite_number", f"{name} must be finite", record_id)
    return float(value)


def _parse_input(raw, record_id: str) -> RecordInput:
    if not isinstance(raw, dict):
        raise _LineError("field_type", "input must be an object", record_id)
    unknown = set(raw) - set(INPUT_KEYS)
    if unknown:
        raise _LineError(
            "unknown_input_key", f"unknown input key(s): {sorted(unknown)}", record_id
        )
    kwargs: dict = {}
    for key in ("text", "image_url", "audio_url", "video_url", "base64"):
        if key in raw:
            kwargs[key] = _require_str(raw[key], f"input.{key}", record_id)
    if "numerical_features" in raw:
        feats = raw["numerical_features"]
        if not isinstance(feats, dict):
            raise _LineError("field_type", "numerical_features must be a map", record_id)
        kwargs["numerical_features"] = {
            str(k): _check_number(v, f"numerical_features[{k}]", record_id)
            for k, v in feats.items()
        }
    if "categorical_features" in raw:
        feats = raw["categorical_features"]
        if not isinstance(feats, dict):
            raise _LineError("field_type", "categorical_features must be a map", record_id)
        for k, v in feats.items():
            if not isinstance(v, str):
                raise _LineError(
                    "field_type", f"categorical_features[{k}] must be a string", record_id
                )
        kwargs["categorical_features"] = {str(k): v for k, v in feats.items()}
    return RecordInput(**kwargs)


def _parse_output(raw, record_id: str) -> RecordOutput:
    if not isinstance(raw, dict):
        raise _LineError("field_type", "output must be an object", record_id)
    unknown = set(raw) - set(OUTPUT_KEYS)
    if unknown:
        raise _LineError(
            "unknown_output_key", f"unknown output key(s): {sorted(unknown)}", record_id
        )
    kwargs: dict = {}
    if "text" in raw:
        kwargs["text"] = _require_str(raw["text"], "output.text", record_id)
    if "numerical" in raw:
        kwargs["numerical"] = _check_number(raw["numerical"], "output.numerical", record_id)
    if "categorical" in raw:
        kwargs["categorical"] = _require_str(raw["categorical"], "output.categorical", record_id)
    if "character_spans" in raw:
        spans = raw["character_spans"]
        if not isinstance(spans, dict) or set(spans) != set(SPAN_KEYS):
            raise _LineError(
                "invalid_span",
                "character_spans must carry exactly start_char and end_char",
                record_id,
            )
        start, end = spans["start_char"], spans["end_char"]
        for name, v in (("start_char", start), ("end_char", end)):
            if isinstance(v, bool) or not isinstance(v, int):
                raise _LineError("invalid_span", f"{name} must be an integer", record_id)
        if not (0 <= start <= end):
            raise _LineError(
                "invalid_span",
                f"require 0 <= start_char <= end_char, got ({start}, {end})",
                record_id,
            )
        kwargs["character_spans"] = CharacterSpan(start_char=start, end_char=end)
    return RecordOutput(**kwargs)


def parse_record(raw: object) -> DataRecord:
    """Validate one decoded JSON value as a DataRecord; raises _LineError."""
    if not isinstance(raw, dict):
        raise _LineError("not_an_object", "line is not a JSON object")
    unknown = set(raw) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise _LineError(
            "unknown_top_level_key",
            f"unknown top-level key(s): {sorted(unknown)}",
            raw.get("unique_id") if isinstance(raw.get("unique_id"), str) else None,
        )
    uid = raw.get("unique_id")
    if not isinstance(uid, str) or not uid:
        raise _LineError("missing_unique_id", "unique_id must be a non-empty string")
    record_input = _parse_input(raw["input"], uid) if "input" in raw else None
    record_output = _parse_output(raw["output"], uid) if "output" in raw else None
    return DataRecord(unique_id=uid, input=record_input, output=record_output)


def parse_jsonl(lines, role: str) -> tuple[DatasetSplit, list[TemplateViolation]]:
    """Parse JSONL lines into a split; invalid lines become violations.

    Lines are handled independently; a line with several problems reports
    only the first one found. Blank lines are skipped. Duplicate unique_id
    keeps the first occurrence and flags the later line.
    """
    if role not in SPLIT_ROLES:
        raise ValueError(f"role must be one of {SPLIT_ROLES}, got {role!r}")
    if isinstance(lines, (str, bytes)):
        lines = io.StringIO(lines if isinstance(lines, str) else lines.decode("utf-8"))
    split = DatasetSplit(role=role)
    violations: list[TemplateViolation] = []
    seen: set[str] = set()
    for line_number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if len(line.encode("utf-8")) > MAX_LINE_BYTES:
            violations.append(
                TemplateViolation(line_number, "line_too_long", "line exceeds 10 MB guard")
            )
            continue
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            violations.append(
                TemplateViolation(line_number, "invalid_json", f"JSON error: {exc}")
            )
            continue
        try:
            record = parse_record(raw)
        except _LineError as exc:
            violations.append(
                TemplateViolation(line_number, exc.code, exc.message, exc.record_id)
            )
            continue
        if record.unique_id in seen:
            violations.append(
                TemplateViolation(
                    line_number,
                    "duplicate_unique_id",
                    f"unique_id {record.unique_id!r} already seen; first occurrence kept",
                    record.unique_id,
                )
            )
            continue
        seen.add(record.unique_id)
        split.records.append(record)
    return split, violations


def _record_to_dict(record: DataRecord) -> dict:
    out: dict = {"unique_id": record.unique_id}
    if record.input is not None:
        inp: dict = {}
        for key in ("text", "image_url", "audio_url", "video_url", "base64"):
            value = getattr(record.input, key)
            if value is not None:
                inp[key] = value
        if record.input.numerical_features is not None:
            inp["numerical_features"] = {
                k: record.input.numerical_features[k]
                for k in sorted(record.input.numerical_features)
            }
        if record.input.categorical_features is not None:
            inp["categorical_features"] = {
                k: record.input.categorical_features[k]
                for k in sorted(record.input.categorical_features)
            }
        out["input"] = inp
    if record.output is not None:
        outp: dict = {}
        if record.output.text is not None:
            outp["text"] = record.output.text
        if record.output.numerical is not None:
            outp["numerical"] = record.output.numerical
        if record.output.categorical is not None:
            outp["categorical"] = record.output.categorical
        if record.output.character_spans is not None:
            outp["character_spans"] = {
                "start_char": record.output.character_spans.start_char,
                "end_char": record.output.character_spans.end_char,
            }
        out["output"] = outp
    return out


def serialize(split: DatasetSplit) -> str:
    """One JSON object per line, stable key order; parse_jsonl round-trips."""
    return "".join(
        json.dumps(_record_to_dict(r), ensure_ascii=False) + "\n" for r in split.records
    )


def resolve_uri(uri: str) -> Path:
    """Map a storage URI to a local path; file:// and bare paths supported."""
    parsed = urlparse(uri)
    if parsed.scheme in ("", "file"):
        return Path(parsed.path or uri)
    raise ValueError(f"unsupported storage URI scheme {parsed.scheme!r}")


def load_split(path: str | Path, role: str) -> tuple[DatasetSplit, list[TemplateViolation]]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        split, violations = parse_jsonl(fh, role)
    split.source_uri = path.resolve().as_uri()
    return split, violations


@dataclass(frozen=True)
class TaskFinding:
    code: str
    message: str
    record_id: str | None = None


@dataclass
class TaskValidationReport:
    task: str
    findings: list[TaskFinding] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.findings


def _feature_signature(record: DataRecord) -> tuple[tuple[str, ...], tuple[str, ...]]:
    num = record.input.numerical_features if record.input else None
    cat = record.input.categorical_features if record.input else None
    return (
        tuple(sorted(num)) if num is not None else (),
        tuple(sorted(cat)) if cat is not None else (),
    )


def validate_for_task(split: DatasetSplit, task: str) -> TaskValidationReport:
    """Check a parsed split against a task kind's structural requirements.

    Tabular tasks need a feature key set that is identical across records
    (per kind) plus the matching output field; binary classification needs
    exactly two distinct train labels; text generation needs input.text
    everywhere and output.text on train/validation.
    """
    if task not in TASK_KINDS:
        raise ValueError(f"task must be one of {TASK_KINDS}, got {task!r}")
    report = TaskValidationReport(task=task)
    if task in TABULAR_TASKS:
        sigs = Counter(_feature_signature(r) for r in split.records)
        reference = None
        if sigs:
            # modal signature; ties broken by smallest sorted signature so the
            # findings multiset is independent of record order
            best = max(sigs.values())
            reference = min(sig for sig, count in sigs.items() if count == best)
        for record in split.records:
            sig = _feature_signature(record)
            if sig == ((), ()):
                report.findings.append(
                    TaskFinding(
                        "missing_features",
                        "record carries no feature maps",
                        record.unique_id,
                    )
                )
                continue
            if reference is not None and sig != reference:
                report.findings.append(
                    TaskFinding(
                        "inconsistent_feature_set",
                        f"feature keys {sig} differ from majority {reference}",
                        record.unique_id,
                    )
                )
            out = record.output
            if task == "regression":
                if out is None or out.numerical is None:
                    report.findings.append(
                        TaskFinding(
                            "missing_output",
                            "regression requires output.numerical",
                            record.unique_id,
                        )
                    )
            else:
                if out is None or out.categorical is None:
                    report.findings.append(
                        TaskFinding(
                            "missing_output",
                            "classification requires output.categorical",
                            record.unique_id,
                        )
                    )
        if task == "binary_classification" and split.role == "train":
            labels = {
                r.output.categorical
                for r in split.records
                if r.output and r.output.categorical is not None
            }
            if len(labels) != 2:
                report.findings.append(
                    TaskFinding(
                        "label_cardinality",
                        f"binary classification needs exactly 2 train labels, got "
                        f"{sorted(labels)}",
                    )
                )
    else:  # text_generation
        for record in split.records:
            if record.input is None or record.input.text is None:
                report.findings.append(
                    TaskFinding(
                        "missing_input_text",
                        "text_generation requires input.text",
                        record.unique_id,
                    )
                )
            if split.role in ("train", "validation") and (
                record.output is None or record.output.text is None
            ):
                report.findings.append(
                    TaskFinding(
                        "missing_output",
                        "text_generation requires output.text on train/validation",
                        record.unique_id,
                    )
                )
    return report
