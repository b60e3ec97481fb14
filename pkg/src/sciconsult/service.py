"""Consult service: file-backed sessions, async jobs, and the full pipeline.

Every session lives in its own directory (session.json, jobs/, artifacts/,
manifest.json). All writes go through an atomic replace, artifact files are
tracked in a checksum manifest, and long-running work (Smart Fill,
recommendation synthesis, prototype runs) executes on a small in-process
worker pool so callers poll job records instead of blocking.

Crash recovery is part of the contract: opening a store marks every job
left queued or running by a dead process as failed("interrupted"), so a
restart never shows a phantom running job.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .config import STRATEGIES, AppConfig
from .arxiv import ArxivConnector, SubprocessConverter
from .context import (
    FULL_PAPER,
    PDF_MODE,
    SUMMARIES,
    TEXT_MODE,
    SummaryCache,
    build_abstract_context,
    build_fullpaper_context,
    build_summaries_context,
)
from .errors import (
    BadRequestError,
    ConflictError,
    NotFoundError,
    ParamValidationError,
    SciConsultError,
    SmartFillPartialError,
)
from .metrics import METRICS_BY_TASK
from .net import LiveTransport, ReplayTransport
from .prototype import (
    COT,
    DIRECT,
    NORMALIZED_EXACT_MATCH,
    FAILED as TOOL_FAILED,
    ToolRequest,
    default_registry,
    run_tabular_tool,
    run_text_prompting_tool,
)
from .questionnaire import (
    AnswerSet,
    Answer,
    default_schema,
    format_qa,
    load_schema,
    validate_answers,
    value_matches_kind,
)
from .recommend import (
    generate,
    lint_citations,
    load_recommendation,
    parse_recommendation,
    save_recommendation,
)
from .retrieval import generate_queries, run_searches, shortlist
from .smartfill import (
    DEFAULT_TOP_M,
    SmartFillSuggestion,
    apply_suggestions,
    load_catalog,
    suggest_answers,
)

QUEUED = "queued"
RUNNING = "running"
SUCCEEDED = "succeeded"
FAILED = "failed"
TERMINAL_STATUSES = (SUCCEEDED, FAILED)

SMARTFILL = "smartfill"
RECOMMENDATION = "recommendation"
PROTOTYPE = "prototype"

STAGES = ("created", "answered", "recommended", "prototyped")

TABULAR_TOOLS = ("tabular_baseline", "tabular_linear")
TEXT_TOOL_MODES = {"text_prompt_direct": DIRECT, "text_prompt_cot": COT}

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_json(path: Path, payload: object) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value: object) -> object:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


class _JobFailed(Exception):
    """Controlled job failure; carries the reason and any partial result."""

    def __init__(self, reason: str, result_uri: str = ""):
        super().__init__(reason)
        self.reason = reason
        self.result_uri = result_uri


@dataclass
class JobRecord:
    """One asynchronous unit of work attached to a session."""

    job_id: str
    kind: str  # smartfill | recommendation | prototype
    status: str = QUEUED
    params: dict = field(default_factory=dict)
    result_uri: str = ""
    error: str | None = None
    warnings: list[str] = field(default_factory=list)
    created_at: float = 0.0
    started_at: float | None = None
    finished_at: float | None = None

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES

    def to_payload(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "params": _jsonable(self.params),
            "result_uri": self.result_uri,
            "error": self.error,
            "warnings": list(self.warnings),
            "created_at": self.created_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "JobRecord":
        return cls(
            job_id=payload["job_id"],
            kind=payload["kind"],
            status=payload["status"],
            params=dict(payload.get("params") or {}),
            result_uri=payload.get("result_uri", ""),
            error=payload.get("error"),
            warnings=list(payload.get("warnings") or []),
            created_at=payload.get("created_at", 0.0),
            started_at=payload.get("started_at"),
            finished_at=payload.get("finished_at"),
        )


class SessionStore:
    """One directory per session; every write is an atomic replace.

    Artifact files are tracked in manifest.json as {relative path: sha256}.
    Writers drop a path from the manifest before touching the file and
    re-add it afterwards, so a crash at any instant leaves either a
    manifest entry that verifies or a file the manifest does not claim;
    never a checksum mismatch.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_root = self.root / "sessions"
        self.sessions_root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()

    # -- layout ---------------------------------------------------------

    def lock(self, session_id: str) -> threading.RLock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.RLock())

    def session_dir(self, session_id: str) -> Path:
        if not _ID_RE.fullmatch(session_id):
            raise NotFoundError(f"unknown session {session_id!r}")
        return self.sessions_root / session_id

    def jobs_dir(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "jobs"

    def artifacts_dir(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "artifacts"

    def list_session_ids(self) -> list[str]:
        if not self.sessions_root.is_dir():
            return []
        return sorted(
            p.name for p in self.sessions_root.iterdir()
            if p.is_dir() and (p / "session.json").is_file()
        )

    # -- session records --------------------------------------------------

    def create_session(self, now: float) -> dict:
        session_id = "s-" + uuid.uuid4().hex[:12]
        record = {
            "session_id": session_id,
            "created_at": now,
            "updated_at": now,
            "stage": "created",
            "project_description": "",
            "answers": {},
            "suggestions": None,
            "shortlist": None,
            "recommendation": None,
            "feedback": [],
            "job_counter": 0,
        }
        directory = self.session_dir(session_id)
        (directory / "jobs").mkdir(parents=True)
        (directory / "artifacts").mkdir()
        self.save_session(record)
        return record

    def load_session(self, session_id: str) -> dict:
        path = self.session_dir(session_id) / "session.json"
        if not path.is_file():
            raise NotFoundError(f"unknown session {session_id!r}")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def save_session(self, record: dict) -> None:
        directory = self.session_dir(record["session_id"])
        _atomic_write_json(directory / "session.json", record)

    # -- job records ------------------------------------------------------

    def load_job(self, session_id: str, job_id: str) -> JobRecord:
        if not _ID_RE.fullmatch(job_id):
            raise NotFoundError(f"unknown job {job_id!r}")
        path = self.jobs_dir(session_id) / f"{job_id}.json"
        if not path.is_file():
            raise NotFoundError(f"unknown job {job_id!r}")
        with open(path, encoding="utf-8") as fh:
            return JobRecord.from_payload(json.load(fh))

    def save_job(self, session_id: str, job: JobRecord) -> None:
        path = self.jobs_dir(session_id) / f"{job.job_id}.json"
        _atomic_write_json(path, job.to_payload())

    def list_jobs(self, session_id: str) -> list[JobRecord]:
        directory = self.jobs_dir(session_id)
        if not directory.is_dir():
            return []
        jobs = []
        for path in sorted(directory.glob("*.json")):
            with open(path, encoding="utf-8") as fh:
                jobs.append(JobRecord.from_payload(json.load(fh)))
        return jobs

    # -- checksum manifest -------------------------------------------------

    def manifest_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "manifest.json"

    def read_manifest(self, session_id: str) -> dict[str, str]:
        path = self.manifest_path(session_id)
        if not path.is_file():
            return {}
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def remove_from_manifest(self, session_id: str, relpaths: list[str]) -> None:
        manifest = self.read_manifest(session_id)
        changed = False
        for rel in relpaths:
            if manifest.pop(rel, None) is not None:
                changed = True
        if changed:
            _atomic_write_json(self.manifest_path(session_id), manifest)

    def add_to_manifest(self, session_id: str, relpaths: list[str]) -> None:
        manifest = self.read_manifest(session_id)
        base = self.artifacts_dir(session_id)
        for rel in relpaths:
            manifest[rel] = _sha256_file(base / rel)
        _atomic_write_json(self.manifest_path(session_id), manifest)

    def add_tree_to_manifest(self, session_id: str, subdir: str) -> None:
        base = self.artifacts_dir(session_id)
        relpaths = [
            str(p.relative_to(base).as_posix())
            for p in sorted((base / subdir).rglob("*"))
            if p.is_file()
        ]
        self.add_to_manifest(session_id, relpaths)

    def verify_manifest(self, session_id: str) -> list[str]:
        """Check every manifest entry against the bytes on disk."""
        problems = []
        base = self.artifacts_dir(session_id)
        for rel, digest in sorted(self.read_manifest(session_id).items()):
            path = base / rel
            if not path.is_file():
                problems.append(f"{rel}: listed in manifest but missing")
            elif _sha256_file(path) != digest:
                problems.append(f"{rel}: checksum mismatch")
        return problems

    # -- crash recovery ----------------------------------------------------

    def recover_interrupted(self, now: float | None = None) -> list[tuple[str, str]]:
        """Fail every job a dead process left queued or running.

        Also sweeps half-written ``*.tmp`` files so an interrupted atomic
        write leaves no debris. Returns the (session_id, job_id) pairs
        that were marked.
        """
        now = time.time() if now is None else now
        marked = []
        for session_id in self.list_session_ids():
            with self.lock(session_id):
                for stray in self.session_dir(session_id).rglob("*.tmp"):
                    stray.unlink()
                for job in self.list_jobs(session_id):
                    if job.terminal:
                        continue
                    job.status = FAILED
                    job.error = "interrupted"
                    job.finished_at = now
                    self.save_job(session_id, job)
                    marked.append((session_id, job.job_id))
        return marked


class ConsultService:
    """Facade over the whole pipeline with persistent sessions and jobs."""

    def __init__(
        self,
        config: AppConfig | None = None,
        *,
        gateway=None,
        connector=None,
        clock=time.time,
    ):
        self.config = config or AppConfig()
        self._clock = clock
        self.schema = self._load_schema()
        self.catalog = (
            load_catalog(self.config.catalog_path) if self.config.catalog_path else []
        )
        self.store = SessionStore(self.config.data_dir)
        self.recovered = self.store.recover_interrupted(self._clock())
        self.gateway = gateway if gateway is not None else self.config.gateway.build()
        self.connector = connector if connector is not None else self._build_connector()
        cache_dir = self.config.summary_cache_dir or str(
            Path(self.config.data_dir) / "summary_cache"
        )
        self._summary_cache = SummaryCache(cache_dir)
        self._registry = default_registry()
        self._queue: queue.Queue = queue.Queue()
        self._closed = False
        self._workers = []
        for index in range(self.config.workers):
            worker = threading.Thread(
                target=self._worker_loop, name=f"consult-worker-{index}", daemon=True
            )
            worker.start()
            self._workers.append(worker)

    def _load_schema(self):
        if self.config.questionnaire_path:
            text = Path(self.config.questionnaire_path).read_text(encoding="utf-8")
            return load_schema(text)
        return default_schema()

    def _build_connector(self) -> ArxivConnector:
        if self.config.cassette_dir:
            transport = ReplayTransport(self.config.cassette_dir)
        else:
            transport = LiveTransport(politeness_delay_s=self.config.politeness_delay_s)
        converter = (
            SubprocessConverter(list(self.config.pdf_converter))
            if self.config.pdf_converter
            else None
        )
        return ArxivConnector(transport, converter=converter)

    # -- lifecycle ----------------------------------------------------------

    def shutdown(self, wait: bool = True) -> None:
        """Stop the workers; queued jobs stay queued on disk."""
        if self._closed:
            return
        self._closed = True
        for _ in self._workers:
            self._queue.put(None)
        if wait:
            for worker in self._workers:
                worker.join()

    def health(self) -> dict:
        return {
            "status": "ok",
            "workers": self.config.workers,
            "sessions": len(self.store.list_session_ids()),
        }

    # -- schema / tools -------------------------------------------------------

    def schema_payload(self) -> dict:
        sections = []
        for section in self.schema.sections:
            sections.append({
                "name": section.name,
                "questions": [
                    {
                        "id": q.id,
                        "text": q.text,
                        "answer_kind": q.answer_kind,
                        "options": list(q.options),
                        "required": q.required,
                        "help_text": q.help_text,
                        "tags": list(q.tags),
                    }
                    for q in section.questions
                ],
            })
        return {"sections": sections}

    def tools_payload(self) -> list[dict]:
        tools = []
        for name in sorted(self._registry):
            spec = self._registry[name]
            tools.append({
                "name": spec.name,
                "description": spec.description,
                "task_kinds": sorted(spec.task_kinds),
                "params": [
                    {
                        "name": p.name,
                        "kind": p.kind,
                        "default": p.default,
                        "minimum": p.minimum,
                        "maximum": p.maximum,
                        "required": p.required,
                    }
                    for p in spec.params
                ],
            })
        return tools

    # -- sessions -------------------------------------------------------------

    def create_session(self) -> dict:
        record = self.store.create_session(self._clock())
        return self._session_payload(record)

    def get_session(self, session_id: str) -> dict:
        return self._session_payload(self.store.load_session(session_id))

    def save_answers(
        self,
        session_id: str,
        *,
        answers: dict | None = None,
        project_description: str | None = None,
        accepted_suggestions: list[str] | None = None,
        edits: dict | None = None,
    ) -> dict:
        """Merge an answers delta into the session, last write wins.

        ``accepted_suggestions`` names stored Smart Fill suggestions to
        apply (with optional per-question ``edits``); plain ``answers``
        always record source="user".
        """
        details = self._answer_details(answers, project_description)
        if accepted_suggestions is not None and (
            not isinstance(accepted_suggestions, list)
            or not all(isinstance(a, str) for a in accepted_suggestions)
        ):
            details.append({
                "field": "accepted_suggestions",
                "message": "must be a list of question ids",
            })
        if edits is not None and not isinstance(edits, dict):
            details.append({"field": "edits", "message": "edits must be a mapping"})
        if details:
            raise BadRequestError("invalid answers payload", details)
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            now = self._clock()
            if project_description is not None:
                record["project_description"] = project_description
            for qid, value in (answers or {}).items():
                record["answers"][qid] = {
                    "value": _jsonable(value),
                    "source": "user",
                    "updated_at": now,
                }
            if accepted_suggestions:
                self._apply_accepted(record, accepted_suggestions, edits or {}, now)
            if record["answers"]:
                self._advance_stage(record, "answered")
            record["updated_at"] = now
            self.store.save_session(record)
            return self._session_payload(record)

    def _answer_details(self, answers, project_description) -> list[dict]:
        details = []
        if project_description is not None and not isinstance(project_description, str):
            details.append({
                "field": "project_description",
                "message": "project_description must be a string",
            })
        if answers is None:
            return details
        if not isinstance(answers, dict):
            return details + [{"field": "answers", "message": "answers must be a mapping"}]
        qmap = self.schema.question_map()
        for qid, value in answers.items():
            question = qmap.get(qid)
            if question is None:
                details.append({
                    "field": qid,
                    "message": f"unknown question {qid!r}",
                })
            elif not value_matches_kind(_tupled(value), question):
                details.append({
                    "field": qid,
                    "message": (
                        f"value does not match kind {question.answer_kind!r}"
                    ),
                })
        return details

    def _apply_accepted(self, record, accepted_ids, edits, now) -> None:
        stored = record.get("suggestions") or {}
        by_id = {
            s["question_id"]: _suggestion_from_payload(s)
            for s in stored.get("suggestions", [])
        }
        missing = sorted(set(accepted_ids) - set(by_id))
        if missing:
            raise BadRequestError(
                "accepted_suggestions name questions with no stored suggestion",
                [{"field": qid, "message": "no suggestion for this question"} for qid in missing],
            )
        answer_set = self._answer_set(record)
        accepted = [by_id[qid] for qid in accepted_ids]
        try:
            merged = apply_suggestions(self.schema, answer_set, accepted, edits)
        except (TypeError, ValueError) as exc:
            raise BadRequestError(str(exc)) from exc
        for qid in accepted_ids:
            answer = merged.answers[qid]
            record["answers"][qid] = {
                "value": _jsonable(answer.value),
                "source": answer.source,
                "updated_at": now,
            }

    def submit_feedback(self, session_id: str, ratings: dict | None = None,
                        text: str = "") -> dict:
        details = []
        ratings = ratings or {}
        if not isinstance(ratings, dict) or not all(
            isinstance(k, str) and isinstance(v, int) and not isinstance(v, bool)
            for k, v in ratings.items()
        ):
            details.append({
                "field": "ratings",
                "message": "ratings must map aspect names to integers",
            })
        if not isinstance(text, str):
            details.append({"field": "text", "message": "text must be a string"})
        if not details and not ratings and not text.strip():
            details.append({
                "field": "feedback",
                "message": "provide ratings, text, or both",
            })
        if details:
            raise BadRequestError("invalid feedback payload", details)
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            now = self._clock()
            record["feedback"].append(
                {"ratings": ratings, "text": text, "created_at": now}
            )
            record["updated_at"] = now
            self.store.save_session(record)
            self._publish_json(
                session_id, "feedback.json", {"feedback": record["feedback"]}
            )
            return {"status": "recorded", "count": len(record["feedback"])}

    # -- jobs -----------------------------------------------------------------

    def get_job(self, session_id: str, job_id: str) -> dict:
        self.store.load_session(session_id)
        return self.store.load_job(session_id, job_id).to_payload()

    def get_prototype_result(self, session_id: str, job_id: str) -> dict:
        """Serve the result payload a prototype run wrote to its output dir."""
        job = self.get_job(session_id, job_id)
        if job["kind"] != PROTOTYPE:
            raise BadRequestError(f"job {job_id!r} is not a prototype run")
        result_path = Path(job["result_uri"]) / "result.json" if job["result_uri"] else None
        if result_path is None or not result_path.is_file():
            raise NotFoundError(f"job {job_id!r} has not produced a result")
        return json.loads(result_path.read_text(encoding="utf-8"))

    def _enqueue(self, session_id: str, kind: str, params: dict, runner) -> dict:
        if self._closed:
            raise SciConsultError("service is shut down")
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            if kind == RECOMMENDATION and self._recommendation_active(session_id):
                raise ConflictError(
                    "a recommendation job is already queued or running for this session"
                )
            record["job_counter"] += 1
            job = JobRecord(
                job_id=f"job-{record['job_counter']:04d}",
                kind=kind,
                params=params,
                created_at=self._clock(),
            )
            self.store.save_job(session_id, job)
            record["updated_at"] = self._clock()
            self.store.save_session(record)
        self._queue.put((session_id, job.job_id, runner))
        return job.to_payload()

    def _recommendation_active(self, session_id: str) -> bool:
        return any(
            job.kind == RECOMMENDATION and not job.terminal
            for job in self.store.list_jobs(session_id)
        )

    def _worker_loop(self) -> None:
        while True:
            task = self._queue.get()
            if task is None:
                self._queue.task_done()
                return
            session_id, job_id, runner = task
            try:
                self._run_job(session_id, job_id, runner)
            finally:
                self._queue.task_done()

    def _run_job(self, session_id: str, job_id: str, runner) -> None:
        with self.store.lock(session_id):
            job = self.store.load_job(session_id, job_id)
            if job.status != QUEUED:  # recovery beat us to it
                return
            job.status = RUNNING
            job.started_at = self._clock()
            self.store.save_job(session_id, job)
        try:
            result_uri, warnings = runner(session_id, job_id)
        except _JobFailed as exc:
            self._finish_job(
                session_id, job_id, FAILED, error=exc.reason, result_uri=exc.result_uri
            )
        except SciConsultError as exc:
            self._finish_job(session_id, job_id, FAILED, error=str(exc))
        except Exception as exc:  # never kill the worker thread
            self._finish_job(
                session_id, job_id, FAILED, error=f"{type(exc).__name__}: {exc}"
            )
        else:
            self._finish_job(
                session_id, job_id, SUCCEEDED, result_uri=result_uri, warnings=warnings
            )

    def _finish_job(self, session_id, job_id, status, *, error=None,
                    result_uri="", warnings=None) -> None:
        with self.store.lock(session_id):
            job = self.store.load_job(session_id, job_id)
            if job.terminal:  # terminal statuses are immutable
                return
            job.status = status
            job.error = error
            if result_uri:
                job.result_uri = result_uri
            if warnings:
                job.warnings = list(warnings)
            job.finished_at = self._clock()
            self.store.save_job(session_id, job)

    # -- smart fill -------------------------------------------------------------

    def run_smartfill(self, session_id: str) -> dict:
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
        if not record["project_description"].strip():
            raise BadRequestError(
                "smart fill needs a project description",
                [{"field": "project_description", "message": "must be non-empty"}],
            )
        return self._enqueue(session_id, SMARTFILL, {}, self._execute_smartfill)

    def _execute_smartfill(self, session_id: str, job_id: str):
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            answer_set = self._answer_set(record)
        partial = False
        try:
            suggestions = suggest_answers(
                self.schema, answer_set, self.catalog, self.gateway, top_m=DEFAULT_TOP_M
            )
        except SmartFillPartialError as exc:
            suggestions = exc.suggestions
            partial = True
            reason = str(exc)
        payload = {
            "created_at": self._clock(),
            "partial": partial,
            "suggestions": [_suggestion_payload(s) for s in suggestions],
        }
        result_uri = self._publish_json(session_id, "smartfill.json", payload)
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            record["suggestions"] = payload
            record["updated_at"] = self._clock()
            self.store.save_session(record)
        if partial:
            raise _JobFailed(reason, result_uri=result_uri)
        return result_uri, []

    # -- recommendation ------------------------------------------------------

    def run_recommendation(
        self,
        session_id: str,
        *,
        strategy: str | None = None,
        k: int | None = None,
        n: int | None = None,
        full_paper_ids: list[str] | None = None,
        full_paper_mode: str | None = None,
        force: bool = False,
    ) -> dict:
        strategy = strategy or self.config.default_strategy
        k = self.config.k_limit if k is None else k
        n = self.config.n_limit if n is None else n
        details = self._recommendation_details(
            strategy, k, n, full_paper_ids, full_paper_mode
        )
        if details:
            raise BadRequestError("invalid recommendation parameters", details)
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
        self._check_answers_gate(record, force)
        params = {
            "strategy": strategy,
            "k": k,
            "n": n,
            "full_paper_ids": list(full_paper_ids or []),
            "full_paper_mode": full_paper_mode or TEXT_MODE,
            "force": force,
        }
        return self._enqueue(
            session_id, RECOMMENDATION, params, self._execute_recommendation
        )

    def _recommendation_details(self, strategy, k, n, full_paper_ids,
                                full_paper_mode) -> list[dict]:
        details = []
        if strategy not in STRATEGIES:
            details.append({
                "field": "strategy",
                "message": f"must be one of {', '.join(STRATEGIES)}",
            })
        for name, value, cap in (("k", k, self.config.k_limit),
                                 ("n", n, self.config.n_limit)):
            if not isinstance(value, int) or isinstance(value, bool) \
                    or not 1 <= value <= cap:
                details.append({
                    "field": name,
                    "message": f"must be an integer between 1 and {cap}",
                })
        if full_paper_mode is not None and full_paper_mode not in (PDF_MODE, TEXT_MODE):
            details.append({
                "field": "full_paper_mode",
                "message": f"must be {PDF_MODE!r} or {TEXT_MODE!r}",
            })
        if full_paper_ids is not None:
            if strategy != FULL_PAPER:
                details.append({
                    "field": "full_paper_ids",
                    "message": "only valid with the full_paper strategy",
                })
            elif not isinstance(full_paper_ids, list) or not all(
                isinstance(p, str) and p for p in full_paper_ids
            ):
                details.append({
                    "field": "full_paper_ids",
                    "message": "must be a list of arXiv id strings",
                })
            else:
                mode = full_paper_mode or TEXT_MODE
                limit = 1 if mode == PDF_MODE else 2
                if not 1 <= len(full_paper_ids) <= limit:
                    details.append({
                        "field": "full_paper_ids",
                        "message": f"{mode} mode takes 1 to {limit} paper id(s)",
                    })
        return details

    def _check_answers_gate(self, record: dict, force: bool) -> None:
        report = validate_answers(self.schema, self._answer_set(record))
        blocking = [
            f for f in report.findings
            if f.kind != "missing_required" or not force
        ]
        if blocking:
            raise BadRequestError(
                "answers do not validate; pass force=true to run with gaps",
                [{"field": f.question_id, "message": f.message} for f in blocking],
            )

    def _execute_recommendation(self, session_id: str, job_id: str):
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            answer_set = self._answer_set(record)
            params = self.store.load_job(session_id, job_id).params
        formatted_qa = format_qa(self.schema, answer_set)
        budget = self.config.context_budget_tokens

        plan = generate_queries(formatted_qa, self.gateway, k_limit=params["k"])
        pool = run_searches(plan, self.connector,
                            per_query_max=self.config.per_query_max)
        short = shortlist(pool, formatted_qa, self.gateway, n_limit=params["n"])
        self._publish_json(session_id, "shortlist.json", {
            "queries": list(plan.queries),
            "papers": [
                {"arxiv_id": p.arxiv_id, "title": p.title, "abstract": p.abstract}
                for p in short.papers
            ],
            "warnings": pool.warnings + short.warnings,
        })
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            record["shortlist"] = [
                {"arxiv_id": p.arxiv_id, "title": p.title} for p in short.papers
            ]
            record["updated_at"] = self._clock()
            self.store.save_session(record)

        strategy = params["strategy"]
        if strategy == SUMMARIES:
            bundle = build_summaries_context(
                short, formatted_qa, self.connector, self.gateway,
                cache=self._summary_cache, budget_tokens=budget,
            )
        elif strategy == FULL_PAPER:
            mode = params["full_paper_mode"]
            ids = params["full_paper_ids"] or [
                p.arxiv_id for p in short.papers[: 1 if mode == PDF_MODE else 2]
            ]
            bundle = build_fullpaper_context(ids, mode, self.connector,
                                             budget_tokens=budget)
        else:
            bundle = build_abstract_context(short, budget_tokens=budget)

        raw = generate(formatted_qa, bundle, self.gateway)
        doc = parse_recommendation(
            raw, context_strategy=bundle.strategy, evidence_ids=tuple(bundle.ids)
        )
        lint = lint_citations(doc)
        artifacts = self.store.artifacts_dir(session_id)
        with self.store.lock(session_id):
            self.store.remove_from_manifest(
                session_id, ["recommendation.md", "recommendation.json"]
            )
            save_recommendation(doc, artifacts)
            self.store.add_to_manifest(
                session_id, ["recommendation.md", "recommendation.json"]
            )
            record = self.store.load_session(session_id)
            record["recommendation"] = {
                "job_id": job_id,
                "strategy": bundle.strategy.label,
                "evidence_ids": list(bundle.ids),
                "lint": [{"kind": f.kind, "message": f.message} for f in lint],
                "created_at": self._clock(),
            }
            self._advance_stage(record, "recommended")
            record["updated_at"] = self._clock()
            self.store.save_session(record)
        warnings = pool.warnings + short.warnings + bundle.warnings
        return str(artifacts / "recommendation.md"), warnings

    def get_recommendation(self, session_id: str) -> dict:
        record = self.store.load_session(session_id)
        meta = record.get("recommendation")
        if not meta:
            raise NotFoundError(f"no recommendation for session {session_id!r}")
        doc = load_recommendation(self.store.artifacts_dir(session_id))
        return {
            "markdown": doc.raw_markdown,
            "thinking": doc.thinking,
            "sections": {
                "best_solution": _section_payload(doc.best_solution),
                "strong_baseline": _section_payload(doc.strong_baseline),
            },
            "strategy": meta["strategy"],
            "evidence_ids": list(doc.evidence_ids),
            "lint": meta["lint"],
            "created_at": meta["created_at"],
        }

    # -- prototype ---------------------------------------------------------

    def run_prototype(self, session_id: str, request: dict) -> dict:
        if not isinstance(request, dict):
            raise BadRequestError("prototype request must be a mapping")
        details = self._prototype_details(request)
        if details:
            raise BadRequestError("invalid prototype parameters", details)
        params = {
            "tool_name": request["tool_name"],
            "task": request["task"],
            "input_uri": request["input_uri"],
            "hyperparameters": dict(request.get("hyperparameters") or {}),
            "metric_names": list(request.get("metric_names") or []),
        }
        return self._enqueue(session_id, PROTOTYPE, params, self._execute_prototype)

    def _prototype_details(self, request: dict) -> list[dict]:
        details = []
        tool_name = request.get("tool_name")
        spec = self._registry.get(tool_name) if isinstance(tool_name, str) else None
        if spec is None:
            known = ", ".join(sorted(self._registry))
            details.append({
                "field": "tool_name",
                "message": f"unknown tool; expected one of {known}",
            })
        task = request.get("task")
        if not isinstance(task, str) or not task:
            details.append({"field": "task", "message": "task is required"})
        elif spec is not None and task not in spec.task_kinds:
            details.append({
                "field": "task",
                "message": f"tool {spec.name!r} does not support task {task!r}",
            })
        input_uri = request.get("input_uri")
        if not isinstance(input_uri, str) or not input_uri:
            details.append({"field": "input_uri", "message": "input_uri is required"})
        hyper = request.get("hyperparameters") or {}
        if not isinstance(hyper, dict):
            details.append({
                "field": "hyperparameters",
                "message": "hyperparameters must be a mapping",
            })
        elif spec is not None:
            try:
                spec.validate_params(hyper)
            except ParamValidationError as exc:
                details.append({
                    "field": exc.param or "hyperparameters",
                    "message": str(exc),
                })
        metric_names = request.get("metric_names") or []
        if not isinstance(metric_names, list) or not all(
            isinstance(m, str) for m in metric_names
        ):
            details.append({
                "field": "metric_names",
                "message": "metric_names must be a list of strings",
            })
        elif isinstance(task, str):
            allowed = set(METRICS_BY_TASK.get(task, ()))
            if task == "text_generation":
                allowed = {NORMALIZED_EXACT_MATCH}
            unknown = sorted(set(metric_names) - allowed)
            if unknown:
                details.append({
                    "field": "metric_names",
                    "message": f"unsupported for task {task!r}: {', '.join(unknown)}",
                })
        return details

    def _execute_prototype(self, session_id: str, job_id: str):
        with self.store.lock(session_id):
            params = self.store.load_job(session_id, job_id).params
        out_dir = self.store.artifacts_dir(session_id) / f"prototype_{job_id}"
        request = ToolRequest(
            tool_name=params["tool_name"],
            input_uri=params["input_uri"],
            output_uri=str(out_dir),
            task=params["task"],
            hyperparameters=dict(params["hyperparameters"]),
            metric_names=tuple(params["metric_names"]),
        )
        if request.tool_name in TABULAR_TOOLS:
            result = run_tabular_tool(request, registry=self._registry)
        else:
            mode = TEXT_TOOL_MODES[request.tool_name]
            result = run_text_prompting_tool(
                request, mode, self.gateway, registry=self._registry
            )
        result_payload = {
            "tool_name": result.tool_name,
            "status": result.status,
            "model_artifact_uri": result.model_artifact_uri,
            "predictions": result.predictions,
            "metrics": result.metrics,
            "log_uri": result.log_uri,
            "warnings": result.warnings,
            "failure_reason": result.failure_reason,
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        with self.store.lock(session_id):
            _atomic_write_json(out_dir / "result.json", result_payload)
            self.store.add_tree_to_manifest(session_id, f"prototype_{job_id}")
        if result.status == TOOL_FAILED:
            raise _JobFailed(
                result.failure_reason or "tool run failed", result_uri=str(out_dir)
            )
        with self.store.lock(session_id):
            record = self.store.load_session(session_id)
            self._advance_stage(record, "prototyped")
            record["updated_at"] = self._clock()
            self.store.save_session(record)
        return str(out_dir), result.warnings

    # -- shared helpers -------------------------------------------------------

    def _answer_set(self, record: dict) -> AnswerSet:
        answers = {
            qid: Answer(
                question_id=qid,
                value=_tupled(entry["value"]),
                source=entry["source"],
            )
            for qid, entry in record["answers"].items()
        }
        return AnswerSet(
            answers=answers, project_description=record["project_description"]
        )

    def _publish_json(self, session_id: str, relpath: str, payload: dict) -> str:
        """Write one artifact and keep the manifest consistent throughout."""
        path = self.store.artifacts_dir(session_id) / relpath
        with self.store.lock(session_id):
            self.store.remove_from_manifest(session_id, [relpath])
            _atomic_write_json(path, payload)
            self.store.add_to_manifest(session_id, [relpath])
        return str(path)

    @staticmethod
    def _advance_stage(record: dict, stage: str) -> None:
        if STAGES.index(stage) > STAGES.index(record["stage"]):
            record["stage"] = stage

    def _session_payload(self, record: dict) -> dict:
        report = validate_answers(self.schema, self._answer_set(record))
        return {
            "session_id": record["session_id"],
            "stage": record["stage"],
            "created_at": record["created_at"],
            "updated_at": record["updated_at"],
            "project_description": record["project_description"],
            "answers": {
                qid: {
                    "value": entry["value"],
                    "source": entry["source"],
                    "updated_at": entry["updated_at"],
                }
                for qid, entry in record["answers"].items()
            },
            "missing_required": sorted(report.missing),
            "suggestions": record["suggestions"],
            "shortlist": record["shortlist"],
            "recommendation": record["recommendation"],
            "feedback_count": len(record["feedback"]),
            "jobs": [job.to_payload() for job in self.store.list_jobs(record["session_id"])],
        }


def _tupled(value: object) -> object:
    return tuple(value) if isinstance(value, list) else value


def _suggestion_payload(s: SmartFillSuggestion) -> dict:
    return {
        "question_id": s.question_id,
        "proposed_value": _jsonable(s.proposed_value),
        "provenance": s.provenance,
        "catalog_entries": list(s.catalog_entries),
        "rationale": s.rationale,
    }


def _suggestion_from_payload(payload: dict) -> SmartFillSuggestion:
    return SmartFillSuggestion(
        question_id=payload["question_id"],
        proposed_value=_tupled(payload["proposed_value"]),
        provenance=payload["provenance"],
        catalog_entries=tuple(payload.get("catalog_entries") or ()),
        rationale=payload.get("rationale", ""),
    )


def _section_payload(section) -> dict:
    return {
        "description": section.description,
        "step_by_step": section.step_by_step,
        "coding_details": section.coding_details,
        "justification": section.justification,
        "references": section.references,
    }
