"""Safe, tool-based prototype execution.

A fixed registry of four tools is the only executable surface: two local
tabular trainers and two per-record text prompting modes. Nothing here ever
evaluates or executes model-generated code; the LLM only picks a tool name
and parameter values, which are validated against the tool's schema before
anything runs.

Artifact layout under output_uri:
  predictions.jsonl   one {"unique_id", "prediction"[, "score"]} per line
  metrics.json        {"task", "evaluated", "metrics", "warnings"}
  run_log.txt         human-readable run report (the only timestamped file)
  model/              manifest.json + model.json (self-describing weights
                      or prompt configuration)
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .data_template import (
    TABULAR_TASKS,
    DataRecord,
    DatasetSplit,
    load_split,
    resolve_uri,
    validate_for_task,
)
from .errors import (
    GatewayError,
    MetricInputError,
    ParamValidationError,
    PrototypeError,
    UnknownToolError,
)
from .gateway import ChatRequest, LlmGateway
from .metrics import METRICS_BY_TASK, compute_metrics
from .recommend import RecommendationDoc
from .tabular_models import (
    FeatureEncoder,
    LinearGDModel,
    MajorityClassPredictor,
    MeanPredictor,
)

SUCCEEDED = "succeeded"
SUCCEEDED_WITH_WARNINGS = "succeeded_with_warnings"
FAILED = "failed"

DIRECT = "direct"
COT = "cot"

COT_INSTRUCTION = "Think step by step before giving your final answer."

TEXT_SYSTEM_TEXT = (
    "You are completing a text task. Produce the answer for the given input."
)

SELECT_SYSTEM_TEXT = (
    "You are choosing one prototype tool for the task below. Pick the single"
    " most suitable tool from the list and fill in any parameters you want"
    " to override; omitted parameters use their defaults. Reply as JSON with"
    " tool_name and params."
)

SELECT_SCHEMA = {
    "type": "object",
    "properties": {
        "tool_name": {"type": "string"},
        "params": {"type": "object"},
    },
    "required": ["tool_name"],
}

#: Heuristic surface-form report for text runs; off unless explicitly requested.
NORMALIZED_EXACT_MATCH = "normalized_exact_match"

DEFAULT_UNITS = (
    "usd",
    "dollars",
    "mph",
    "miles per hour",
    "km",
    "kilometers",
    "kg",
    "percent",
)

_CURRENCY_RE = re.compile(r"^[$€£¥]+\s*")
_THOUSANDS_RE = re.compile(r"(?<=\d),(?=\d{3}\b)")


@dataclass(frozen=True)
class ParamSpec:
    """One named tool parameter; default=None marks it required."""

    name: str
    kind: str  # int | float | string
    default: object = None
    minimum: float | None = None
    maximum: float | None = None

    def __post_init__(self):
        if self.kind not in ("int", "float", "string"):
            raise ValueError(f"parameter {self.name!r}: unknown kind {self.kind!r}")

    @property
    def required(self) -> bool:
        return self.default is None

    def describe(self) -> str:
        bits = [self.kind, "required" if self.required else f"default {self.default}"]
        if self.minimum is not None:
            bits.append(f"min {self.minimum}")
        if self.maximum is not None:
            bits.append(f"max {self.maximum}")
        return f"{self.name} ({', '.join(bits)})"

    def coerce(self, value: object) -> object:
        if self.kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ParamValidationError(
                    f"parameter {self.name!r} must be an integer, got {value!r}",
                    param=self.name,
                )
        elif self.kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParamValidationError(
                    f"parameter {self.name!r} must be a number, got {value!r}",
                    param=self.name,
                )
            value = float(value)
        else:
            if not isinstance(value, str):
                raise ParamValidationError(
                    f"parameter {self.name!r} must be a string, got {value!r}",
                    param=self.name,
                )
        if self.minimum is not None and value < self.minimum:
            raise ParamValidationError(
                f"parameter {self.name!r} must be >= {self.minimum}, got {value!r}",
                param=self.name,
            )
        if self.maximum is not None and value > self.maximum:
            raise ParamValidationError(
                f"parameter {self.name!r} must be <= {self.maximum}, got {value!r}",
                param=self.name,
            )
        return value


@dataclass(frozen=True)
class ToolSpec:
    name: str
    task_kinds: frozenset[str]
    params: tuple[ParamSpec, ...]
    description: str

    def validate_params(self, raw: dict | None) -> dict:
        """Check raw hyperparameters against the schema and fill defaults."""
        raw = dict(raw or {})
        known = {p.name for p in self.params}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ParamValidationError(
                f"unknown parameter(s) {unknown} for tool {self.name!r}"
            )
        validated: dict = {}
        for spec in self.params:
            if spec.name in raw:
                validated[spec.name] = spec.coerce(raw[spec.name])
            elif spec.required:
                raise ParamValidationError(
                    f"missing required parameter {spec.name!r} for tool {self.name!r}",
                    param=spec.name,
                )
            else:
                validated[spec.name] = spec.default
        return validated

    def describe(self) -> str:
        lines = [
            f"- {self.name}: {self.description}",
            f"  tasks: {', '.join(sorted(self.task_kinds))}",
        ]
        if self.params:
            lines.append(f"  params: {'; '.join(p.describe() for p in self.params)}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ToolRequest:
    tool_name: str
    input_uri: str
    output_uri: str
    task: str
    hyperparameters: dict = field(default_factory=dict)
    metric_names: tuple[str, ...] = ()
    compute_profile: str = "local"


@dataclass
class ToolRunResult:
    tool_name: str
    status: str
    model_artifact_uri: str = ""
    predictions: list[dict] = field(default_factory=list)
    metrics: dict | None = None  # None == not evaluated
    log_uri: str = ""
    warnings: list[str] = field(default_factory=list)
    failure_reason: str | None = None


def default_registry() -> dict[str, ToolSpec]:
    tools = [
        ToolSpec(
            name="tabular_baseline",
            task_kinds=frozenset(TABULAR_TASKS),
            params=(ParamSpec("seed", "int", default=0, minimum=0),),
            description=(
                "Constant baseline: predicts the majority train class for"
                " classification and the train mean for regression."
            ),
        ),
        ToolSpec(
            name="tabular_linear",
            task_kinds=frozenset(TABULAR_TASKS),
            params=(
                ParamSpec("learning_rate", "float", default=0.1, minimum=1e-6, maximum=10.0),
                ParamSpec("epochs", "int", default=200, minimum=1, maximum=10_000),
                ParamSpec("l2", "float", default=0.0, minimum=0.0, maximum=100.0),
                ParamSpec("seed", "int", default=0, minimum=0),
            ),
            description=(
                "Gradient-descent linear model: least squares for regression,"
                " logistic for binary, softmax for multi-class. Standardizes"
                " numeric features, one-hot encodes categoricals, and keeps"
                " the best epoch by validation metric."
            ),
        ),
        ToolSpec(
            name="text_prompt_direct",
            task_kinds=frozenset({"text_generation"}),
            params=(ParamSpec("max_output_tokens", "int", default=512, minimum=1, maximum=8192),),
            description=(
                "Per-record direct prompting over input.text; stores the raw"
                " model reply as the prediction."
            ),
        ),
        ToolSpec(
            name="text_prompt_cot",
            task_kinds=frozenset({"text_generation"}),
            params=(ParamSpec("max_output_tokens", "int", default=1024, minimum=1, maximum=8192),),
            description=(
                "Per-record chain-of-thought prompting: prepends a"
                " step-by-step instruction before each input."
            ),
        ),
    ]
    return {tool.name: tool for tool in tools}


def list_tools(registry: dict[str, ToolSpec] | None = None) -> list[ToolSpec]:
    registry = default_registry() if registry is None else registry
    return list(registry.values())


def select_tool(
    task: str | RecommendationDoc,
    registry: dict[str, ToolSpec],
    gateway: LlmGateway,
) -> tuple[ToolSpec, dict]:
    """One structured gateway call picking a tool plus validated params.

    Never executes anything; unknown tool names and bad parameters raise so
    a human can confirm or correct the choice.
    """
    if not registry:
        raise ValueError("tool registry is empty")
    if isinstance(task, RecommendationDoc):
        best = task.best_solution
        summary = "\n\n".join(p for p in (best.description, best.coding_details) if p)
    else:
        summary = task
    listing = "\n".join(tool.describe() for tool in registry.values())
    request = ChatRequest(
        system_text=SELECT_SYSTEM_TEXT,
        user_text=f"Task:\n{summary}\n\nAvailable tools:\n{listing}",
        output_schema=SELECT_SCHEMA,
        max_output_tokens=1024,
    )
    reply = gateway.complete_structured(request)
    tool = registry.get(reply["tool_name"])
    if tool is None:
        raise UnknownToolError(f"model chose unknown tool {reply['tool_name']!r}")
    return tool, tool.validate_params(reply.get("params"))


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_splits(
    directory: Path, task: str, required: tuple[str, ...], optional: tuple[str, ...]
) -> tuple[dict[str, DatasetSplit], list[str]]:
    splits: dict[str, DatasetSplit] = {}
    problems: list[str] = []
    for role in required + optional:
        path = directory / f"{role}.jsonl"
        if not path.exists():
            if role in required:
                problems.append(f"missing required split file {role}.jsonl")
            continue
        split, violations = load_split(path, role)
        for v in violations:
            problems.append(f"{role}.jsonl line {v.line_number}: {v.code}: {v.message}")
        report = validate_for_task(split, task)
        for f in report.findings:
            where = f" (record {f.record_id})" if f.record_id else ""
            problems.append(f"{role}: {f.code}: {f.message}{where}")
        splits[role] = split
    return splits, problems


def _rows(records: list[DataRecord]) -> list[tuple[dict, dict]]:
    return [
        (
            (r.input.numerical_features if r.input else None) or {},
            (r.input.categorical_features if r.input else None) or {},
        )
        for r in records
    ]


def _truth(records: list[DataRecord], task: str) -> dict:
    if task == "regression":
        return {r.unique_id: float(r.output.numerical) for r in records}
    return {r.unique_id: str(r.output.categorical) for r in records}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_predictions(path: Path, rows: list[dict]) -> None:
    path.write_text(
        "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows),
        encoding="utf-8",
    )


def _write_log(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _failed_result(
    request: ToolRequest, out_dir: Path, params: dict, problems: list[str]
) -> ToolRunResult:
    log_path = out_dir / "run_log.txt"
    _write_log(
        log_path,
        [
            f"tool: {request.tool_name}",
            f"task: {request.task}",
            f"compute_profile: {request.compute_profile}",
            f"params: {json.dumps(params, sort_keys=True)}",
            f"started_at: {_timestamp()}",
            "status: failed",
            "findings:",
            *[f"  - {p}" for p in problems],
        ],
    )
    return ToolRunResult(
        tool_name=request.tool_name,
        status=FAILED,
        log_uri=log_path.as_uri(),
        warnings=list(problems),
        failure_reason=f"input validation failed: {'; '.join(problems[:5])}",
    )


def _check_metrics_requested(metric_names, allowed, task: str) -> None:
    bad = [m for m in metric_names if m not in allowed]
    if bad:
        raise MetricInputError(f"metric(s) {bad} not valid for task {task!r}")


def _resolve_tool(request: ToolRequest, registry: dict[str, ToolSpec] | None) -> ToolSpec:
    registry = default_registry() if registry is None else registry
    tool = registry.get(request.tool_name)
    if tool is None:
        raise UnknownToolError(f"unknown tool {request.tool_name!r}")
    if request.task not in tool.task_kinds:
        raise PrototypeError(
            f"tool {tool.name!r} does not support task {request.task!r}"
        )
    return tool


def run_tabular_tool(
    request: ToolRequest, registry: dict[str, ToolSpec] | None = None
) -> ToolRunResult:
    """Train a local tabular tool and write the full artifact set.

    Trains on train.jsonl, uses validation.jsonl for epoch selection when
    present (linear tool), predicts test.jsonl, and computes the requested
    metrics against the test outputs. Dataset problems come back as a
    failed-status result; metric/task mismatches raise.
    """
    tool = _resolve_tool(request, registry)
    if request.task not in TABULAR_TASKS:
        raise PrototypeError(f"run_tabular_tool cannot run task {request.task!r}")
    params = tool.validate_params(request.hyperparameters)
    _check_metrics_requested(request.metric_names, METRICS_BY_TASK[request.task], request.task)

    out_dir = resolve_uri(request.output_uri)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _timestamp()
    splits, problems = _load_splits(
        resolve_uri(request.input_uri), request.task,
        required=("train", "test"), optional=("validation",),
    )
    for role in ("train", "test"):
        if role in splits and not splits[role].records:
            problems.append(f"{role} split contains no records")
    if problems:
        return _failed_result(request, out_dir, params, problems)

    train, test = splits["train"], splits["test"]
    validation = splits.get("validation")
    y_train = list(_truth(train.records, request.task).values())
    scores: dict[str, float] | None = None
    log_extra: list[str] = []

    if tool.name == "tabular_baseline":
        if request.task == "regression":
            model = MeanPredictor().fit(train.records, y_train)
            model_payload = {"kind": "mean", "mean": model.mean_}
        else:
            model = MajorityClassPredictor().fit(train.records, y_train)
            model_payload = {"kind": "majority", "majority": model.majority_}
        predicted = model.predict(test.records)
    else:
        encoder = FeatureEncoder().fit(_rows(train.records))
        model = LinearGDModel(
            task=request.task,
            learning_rate=params["learning_rate"],
            epochs=params["epochs"],
            l2=params["l2"],
            seed=params["seed"],
        )
        x_val = y_val = None
        if validation is not None and validation.records:
            x_val = encoder.transform(_rows(validation.records))
            y_val = list(_truth(validation.records, request.task).values())
        model.fit(encoder.transform(_rows(train.records)), y_train, x_val, y_val)
        x_test = encoder.transform(_rows(test.records))
        predicted = model.predict(x_test)
        if request.task == "binary_classification":
            scores = {
                rec.unique_id: score
                for rec, score in zip(test.records, model.predict_scores(x_test))
            }
        log_extra.append(f"best_epoch: {model.best_epoch_}")
        model_payload = {
            "kind": "linear_gd",
            "task": request.task,
            "classes": list(getattr(model, "classes_", ())) or None,
            "coef": np_to_lists(model.coef_),
            "intercept": np_to_lists(model.intercept_),
            "best_epoch": model.best_epoch_,
            "encoder": {
                "numeric_keys": list(encoder.numeric_keys_),
                "means": encoder.means_,
                "stds": encoder.stds_,
                "categories": {k: list(v) for k, v in encoder.categories_.items()},
            },
        }

    pred_map = {rec.unique_id: value for rec, value in zip(test.records, predicted)}
    warnings: list[str] = []
    metrics: dict | None = None
    if request.metric_names:
        report = compute_metrics(
            pred_map,
            _truth(test.records, request.task),
            request.task,
            list(request.metric_names),
            scores=scores,
        )
        metrics = report.values
        warnings.extend(report.warnings)

    rows = []
    for rec in test.records:
        row = {"unique_id": rec.unique_id, "prediction": pred_map[rec.unique_id]}
        if scores is not None:
            row["score"] = scores[rec.unique_id]
        rows.append(row)
    _write_predictions(out_dir / "predictions.jsonl", rows)
    _write_json(
        out_dir / "metrics.json",
        {
            "task": request.task,
            "evaluated": metrics is not None,
            "metrics": metrics,
            "warnings": warnings,
        },
    )
    model_dir = out_dir / "model"
    model_dir.mkdir(exist_ok=True)
    _write_json(
        model_dir / "manifest.json",
        {
            "tool": tool.name,
            "task": request.task,
            "params": params,
            "format": "json-weights-v1",
            "files": ["model.json"],
        },
    )
    _write_json(model_dir / "model.json", model_payload)
    log_path = out_dir / "run_log.txt"
    _write_log(
        log_path,
        [
            f"tool: {tool.name}",
            f"task: {request.task}",
            f"compute_profile: {request.compute_profile}",
            f"params: {json.dumps(params, sort_keys=True)}",
            f"started_at: {started}",
            f"train_records: {len(train.records)}",
            f"validation_records: {len(validation.records) if validation else 0}",
            f"test_records: {len(test.records)}",
            *log_extra,
            f"metrics: {json.dumps(metrics, sort_keys=True)}",
            *[f"warning: {w}" for w in warnings],
            "status: succeeded",
            f"finished_at: {_timestamp()}",
        ],
    )
    return ToolRunResult(
        tool_name=tool.name,
        status=SUCCEEDED,
        model_artifact_uri=model_dir.as_uri(),
        predictions=rows,
        metrics=metrics,
        log_uri=log_path.as_uri(),
        warnings=warnings,
    )


def np_to_lists(value):
    """JSON-friendly copy of a numpy array / scalar."""
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def run_text_prompting_tool(
    request: ToolRequest,
    mode: str,
    gateway: LlmGateway,
    registry: dict[str, ToolSpec] | None = None,
) -> ToolRunResult:
    """Run per-record prompting over the test split.

    Makes one gateway call per test record (cot mode prepends the
    step-by-step instruction). There is no evaluation report by default;
    pass metric_names=("normalized_exact_match",) to add the heuristic
    surface-form report when the test split carries reference outputs.
    """
    if mode not in (DIRECT, COT):
        raise ValueError(f"mode must be '{DIRECT}' or '{COT}', got {mode!r}")
    tool = _resolve_tool(request, registry)
    if request.task != "text_generation":
        raise PrototypeError(f"run_text_prompting_tool cannot run task {request.task!r}")
    params = tool.validate_params(request.hyperparameters)
    _check_metrics_requested(request.metric_names, (NORMALIZED_EXACT_MATCH,), request.task)

    out_dir = resolve_uri(request.output_uri)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _timestamp()
    splits, problems = _load_splits(
        resolve_uri(request.input_uri), request.task,
        required=("test",), optional=("train", "validation"),
    )
    if "test" in splits and not splits["test"].records:
        problems.append("test split contains no records")
    if problems:
        return _failed_result(request, out_dir, params, problems)

    test = splits["test"]
    rows: list[dict] = []
    warnings: list[str] = []
    failures = 0
    for rec in test.records:
        user_text = rec.input.text
        if mode == COT:
            user_text = f"{COT_INSTRUCTION}\n\n{user_text}"
        try:
            reply = gateway.complete(
                ChatRequest(
                    system_text=TEXT_SYSTEM_TEXT,
                    user_text=user_text,
                    max_output_tokens=params["max_output_tokens"],
                )
            )
        except GatewayError as exc:
            failures += 1
            warnings.append(f"record {rec.unique_id} failed: {exc}")
            continue
        rows.append({"unique_id": rec.unique_id, "prediction": reply})

    metrics: dict | None = None
    if NORMALIZED_EXACT_MATCH in request.metric_names and rows:
        refs = {
            r.unique_id: r.output.text
            for r in test.records
            if r.output is not None and r.output.text is not None
        }
        scorable = [row for row in rows if row["unique_id"] in refs]
        if scorable:
            hits = sum(
                normalize_text_answer(row["prediction"])
                == normalize_text_answer(refs[row["unique_id"]])
                for row in scorable
            )
            metrics = {NORMALIZED_EXACT_MATCH: hits / len(scorable)}
            warnings.append(
                "normalized_exact_match is a heuristic surface-form report,"
                " not a full evaluation"
            )
        else:
            warnings.append(
                "normalized_exact_match skipped: no reference outputs on the test split"
            )

    if not rows:
        status = FAILED
        failure_reason = f"all {len(test.records)} test records failed"
    elif failures:
        status = SUCCEEDED_WITH_WARNINGS
        failure_reason = None
    else:
        status = SUCCEEDED
        failure_reason = None

    _write_predictions(out_dir / "predictions.jsonl", rows)
    _write_json(
        out_dir / "metrics.json",
        {
            "task": request.task,
            "evaluated": metrics is not None,
            "metrics": metrics,
            "warnings": warnings,
        },
    )
    model_dir = out_dir / "model"
    model_dir.mkdir(exist_ok=True)
    _write_json(
        model_dir / "manifest.json",
        {
            "tool": tool.name,
            "task": request.task,
            "params": params,
            "format": "prompt-config-v1",
            "files": ["model.json"],
        },
    )
    _write_json(
        model_dir / "model.json",
        {
            "kind": "prompt_config",
            "mode": mode,
            "system_text": TEXT_SYSTEM_TEXT,
            "instruction": COT_INSTRUCTION if mode == COT else None,
            "max_output_tokens": params["max_output_tokens"],
        },
    )
    log_path = out_dir / "run_log.txt"
    _write_log(
        log_path,
        [
            f"tool: {tool.name}",
            f"task: {request.task}",
            f"mode: {mode}",
            f"compute_profile: {request.compute_profile}",
            f"params: {json.dumps(params, sort_keys=True)}",
            f"started_at: {started}",
            f"test_records: {len(test.records)}",
            f"predictions: {len(rows)}",
            f"failed_records: {failures}",
            f"metrics: {json.dumps(metrics, sort_keys=True)}",
            *[f"warning: {w}" for w in warnings],
            f"status: {status}",
            f"finished_at: {_timestamp()}",
        ],
    )
    return ToolRunResult(
        tool_name=tool.name,
        status=status,
        model_artifact_uri=model_dir.as_uri(),
        predictions=rows,
        metrics=metrics,
        log_uri=log_path.as_uri(),
        warnings=warnings,
        failure_reason=failure_reason,
    )


def normalize_text_answer(raw: str, units: tuple[str, ...] = DEFAULT_UNITS) -> str:
    """Canonicalize a short free-text answer for surface-form comparison.

    Lowercases and trims, strips leading currency symbols, removes
    thousands separators inside digit groups, and drops one trailing unit
    token from the configurable unit list ("8,400", "$8400" and "8400 USD"
    all normalize to "8400").
    """
    text = raw.strip().lower()
    text = _CURRENCY_RE.sub("", text)
    text = _THOUSANDS_RE.sub("", text)
    for unit in sorted(units, key=len, reverse=True):
        if text.endswith(" " + unit):
            text = text[: -len(unit) - 1].rstrip()
            break
    return text.strip()
