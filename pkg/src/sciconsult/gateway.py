"""Single facade for all LLM calls.

Two backends: a remote JSON API and a scripted deterministic backend that
replays a fixed transcript (used by every test in this repo). Structured
output is requested through a JSON Schema descriptor and enforced with a
bounded extract-and-repair loop.
"""

from __future__ import annotations

import base64
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field

import jsonschema

from .errors import (
    StructuredOutputError,
    TokenLimitError,
    TranscriptExhaustedError,
    TransportError,
)

PDF = "pdf"
PLAIN_TEXT = "plain_text"

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def estimate_tokens(chars: int) -> int:
    """Cheap conservative token estimate: ceil(chars / 4)."""
    return math.ceil(chars / 4)


@dataclass(frozen=True)
class Attachment:
    data: bytes
    media_kind: str  # pdf | plain_text

    def estimated_chars(self) -> int:
        if self.media_kind == PDF:
            # base64 expansion: 4 output chars per 3 input bytes
            return math.ceil(len(self.data) * 4 / 3)
        return len(self.data)


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    attachments: tuple[Attachment, ...] = ()
    output_schema: dict | None = None  # None -> free_text mode
    max_output_tokens: int = 4096

    def __post_init__(self):
        pdf_count = sum(1 for a in self.attachments if a.media_kind == PDF)
        if pdf_count > 1:
            raise ValueError("at most one pdf attachment per request")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def estimated_input_tokens(self) -> int:
        chars = len(self.system_text) + len(self.user_text)
        chars += sum(a.estimated_chars() for a in self.attachments)
        return estimate_tokens(chars)

    def with_user_text(self, text: str) -> "ChatRequest":
        return ChatRequest(
            system_text=self.system_text,
            user_text=text,
            attachments=self.attachments,
            output_schema=self.output_schema,
            max_output_tokens=self.max_output_tokens,
        )


class ScriptedBackend:
    """Replays responses strictly in call order; raises on exhaustion.

    Transcript entries are either plain strings or {"response": str,
    "delay_s": float} mappings (the delay is only used by tests that need a
    call to dwell, e.g. the crash-safety scenario).
    """

    kind = "scripted"

    def __init__(self, transcript: list):
        self._entries = list(transcript)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._cursor

    def send(self, request: ChatRequest) -> str:
        with self._lock:
            if self._cursor >= len(self._entries):
                raise TranscriptExhaustedError(
                    f"scripted transcript exhausted after {self._cursor} calls"
                )
            entry = self._entries[self._cursor]
            self._cursor += 1
        if isinstance(entry, dict):
            delay = float(entry.get("delay_s", 0))
            if delay:
                time.sleep(delay)
            return entry["response"]
        return entry


class RemoteBackend:
    """Minimal JSON-over-HTTP chat backend (OpenAI-style message list)."""

    kind = "remote_api"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        api_key_env: str = "SCICONSULT_API_KEY",
        timeout_s: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key or os.environ.get(api_key_env)
        self.timeout_s = timeout_s

    def send(self, request: ChatRequest) -> str:
        import requests

        content: list[dict] = [{"type": "text", "text": request.user_text}]
        for att in request.attachments:
            if att.media_kind == PDF:
                content.append(
                    {
                        "type": "document",
                        "media_type": "application/pdf",
                        "data": base64.b64encode(att.data).decode("ascii"),
                    }
                )
            else:
                content.append({"type": "text", "text": att.data.decode("utf-8", "replace")})
        payload = {
            "model": self.model,
            "max_tokens": request.max_output_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": content},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise TransportError(f"LLM endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"LLM endpoint returned HTTP {resp.status_code}")
        body = resp.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected LLM response shape: {body!r}") from exc


@dataclass
class AuditRecord:
    system_text: str
    user_text: str
    response: str
    attachments: int = 0


def extract_json(text: str):
    """Pull the outermost JSON value out of model text.

    Tries the raw text, then fenced code blocks, then the first balanced
    {...} or [...] region. Raises ValueError when nothing parses.
    """
    candidates = [text.strip()]
    candidates += [m.strip() for m in _FENCE_RE.findall(text)]
    for start_ch, end_ch in (("{", "}"), ("[", "]")):
        start = text.find(start_ch)
        if start != -1:
            depth = 0
            in_string = False
            escape = False
            for i in range(start, len(text)):
                ch = text[i]
                if in_string:
                    if escape:
                        escape = False
                    elif ch == "\\":
                        escape = True
                    elif ch == '"':
                        in_string = False
                    continue
                if ch == '"':
                    in_string = True
                elif ch == start_ch:
                    depth += 1
                elif ch == end_ch:
                    depth -= 1
                    if depth == 0:
                        candidates.append(text[start : i + 1])
                        break
    last_error: Exception | None = None
    for cand in candidates:
        if not cand:
            continue
        try:
            return json.loads(cand)
        except json.JSONDecodeError as exc:
            last_error = exc
    raise ValueError(f"no JSON value found in model output: {last_error}")


class LlmGateway:
    """Thread-safe gateway with audit logging and pre-flight token guards."""

    def __init__(
        self,
        backend,
        context_window_tokens: int = 200_000,
        max_in_flight: int = 2,
        max_transport_retries: int = 2,
        retry_backoff_s: float = 0.5,
        audit_path: str | None = None,
    ):
        self.backend = backend
        self.context_window_tokens = context_window_tokens
        self._semaphore = threading.Semaphore(max_in_flight)
        self.max_transport_retries = max_transport_retries
        self.retry_backoff_s = retry_backoff_s
        self.audit_path = audit_path
        self._audit_lock = threading.Lock()
        self.audit_log: list[AuditRecord] = []

    @property
    def call_count(self) -> int:
        return len(self.audit_log)

    def token_budget(self) -> int:
        return self.context_window_tokens

    def _record(self, request: ChatRequest, response: str) -> None:
        record = AuditRecord(
            system_text=request.system_text,
            user_text=request.user_text,
            response=response,
            attachments=len(request.attachments),
        )
        with self._audit_lock:
            self.audit_log.append(record)
            if self.audit_path:
                with open(self.audit_path, "a", encoding="utf-8") as fh:
                    fh.write(
                        json.dumps(
                            {
                                "system_text": record.system_text,
                                "user_text": record.user_text,
                                "response": record.response,
                                "attachments": record.attachments,
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )

    def complete(self, request: ChatRequest) -> str:
        """Run one request against the backend; returns raw model text."""
        total = request.estimated_input_tokens() + request.max_output_tokens
        if total > self.context_window_tokens:
            raise TokenLimitError(
                f"estimated {total} tokens exceeds context window "
                f"{self.context_window_tokens}"
            )
        attempts = 0
        while True:
            try:
                with self._semaphore:
                    response = self.backend.send(request)
                break
            except TransportError:
                attempts += 1
                if attempts > self.max_transport_retries:
                    raise
                time.sleep(self.retry_backoff_s * attempts)
        self._record(request, response)
        return response

    def complete_structured(self, request: ChatRequest, max_repair_attempts: int = 2):
        """Return a parsed value conforming to request.output_schema.

        On malformed output, extracts JSON (fences, outermost value) and, if
        still invalid, re-asks up to max_repair_attempts times with the parse
        error appended. Never returns a value that fails the schema.
        """
        if request.output_schema is None:
            raise ValueError("complete_structured requires output_schema")
        raw_responses: list[str] = []
        current = request
        for _ in range(max_repair_attempts + 1):
            raw = self.complete(current)
            raw_responses.append(raw)
            try:
                value = extract_json(raw)
                jsonschema.validate(value, request.output_schema)
                return value
            except (ValueError, jsonschema.ValidationError) as exc:
                error_text = str(exc).splitlines()[0]
                current = current.with_user_text(
                    request.user_text
                    + "\n\nYour previous reply could not be parsed against the "
                    + "required JSON schema. Error: "
                    + error_text
                    + "\nReply with JSON only."
                )
        raise StructuredOutputError(
            f"structured output still invalid after {max_repair_attempts + 1} attempts",
            raw_responses,
        )


@dataclass
class GatewayConfig:
    """Gateway section of the app config file."""

    kind: str = "scripted"
    transcript: list = field(default_factory=list)
    transcript_path: str | None = None
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "SCICONSULT_API_KEY"
    context_window_tokens: int = 200_000
    max_in_flight: int = 2
    max_repair_attempts: int = 2
    audit_path: str | None = None

    def build(self) -> LlmGateway:
        if self.kind == "scripted":
            if self.transcript_path:
                backend = ScriptedBackend.from_file(self.transcript_path)
            else:
                backend = ScriptedBackend(self.transcript)
        elif self.kind == "remote_api":
            backend = RemoteBackend(
                endpoint=self.endpoint, model=self.model, api_key_env=self.api_key_env
            )
        else:
            raise ValueError(f"unknown gateway kind {self.kind!r}")
        return LlmGateway(
            backend,
            context_window_tokens=self.context_window_tokens,
            max_in_flight=self.max_in_flight,
            audit_path=self.audit_path,
        )
