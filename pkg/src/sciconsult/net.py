"""HTTP transport seam: live requests, cassette replay, and recording.

Every network operation in the package goes through one of these transports,
so tests replay recorded exchanges with zero live traffic. Cassette files are
JSON, one exchange per file: {url, status, headers, body_b64}.
"""

from __future__ import annotations

import base64
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

from .errors import CassetteMissError, TransportError

HEADER_SUBSET = ("content-type",)


@dataclass(frozen=True)
class HttpResponse:
    url: str
    status: int
    headers: dict
    body: bytes


class LiveTransport:
    """requests-backed transport with a per-host politeness delay."""

    def __init__(self, politeness_delay_s: float = 3.0, timeout_s: float = 60.0):
        self.politeness_delay_s = politeness_delay_s
        self.timeout_s = timeout_s
        self._last_request: dict[str, float] = {}
        self._host_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, host: str) -> threading.Lock:
        with self._registry_lock:
            if host not in self._host_locks:
                self._host_locks[host] = threading.Lock()
            return self._host_locks[host]

    def get(self, url: str) -> HttpResponse:
        import requests

        host = urlparse(url).netloc
        with self._lock_for(host):
            elapsed = time.monotonic() - self._last_request.get(host, -1e9)
            wait = self.politeness_delay_s - elapsed
            if wait > 0:
                time.sleep(wait)
            try:
                resp = requests.get(url, timeout=self.timeout_s)
            except requests.RequestException as exc:
                raise TransportError(f"GET {url} failed: {exc}") from exc
            finally:
                self._last_request[host] = time.monotonic()
        headers = {
            k.lower(): v for k, v in resp.headers.items() if k.lower() in HEADER_SUBSET
        }
        return HttpResponse(url=url, status=resp.status_code, headers=headers, body=resp.content)


def _slug(url: str) -> str:
    return re.sub(r"[^a-zA-Z0-9]+", "_", url)[:80].strip("_")


class ReplayTransport:
    """Serves recorded exchanges; matches by exact URL in recording order."""

    def __init__(self, cassette_dir: str | Path):
        self.cassette_dir = Path(cassette_dir)
        self._records: list[dict] = []
        self._consumed: list[bool] = []
        self._lock = threading.Lock()
        self.access_count = 0
        for path in sorted(self.cassette_dir.glob("*.json")):
            with open(path, encoding="utf-8") as fh:
                self._records.append(json.load(fh))
            self._consumed.append(False)

    def get(self, url: str) -> HttpResponse:
        with self._lock:
            self.access_count += 1
            for i, record in enumerate(self._records):
                if record["url"] == url and not self._consumed[i]:
                    self._consumed[i] = True
                    return HttpResponse(
                        url=url,
                        status=int(record["status"]),
                        headers=dict(record.get("headers", {})),
                        body=base64.b64decode(record["body_b64"]),
                    )
            # repeated identical GETs may replay an already-consumed record
            for record in self._records:
                if record["url"] == url:
                    return HttpResponse(
                        url=url,
                        status=int(record["status"]),
                        headers=dict(record.get("headers", {})),
                        body=base64.b64decode(record["body_b64"]),
                    )
        raise CassetteMissError(f"no cassette record for {url}")


class RecordingTransport:
    """Wraps a live transport and writes each exchange as a cassette file."""

    def __init__(self, inner, cassette_dir: str | Path):
        self.inner = inner
        self.cassette_dir = Path(cassette_dir)
        self.cassette_dir.mkdir(parents=True, exist_ok=True)
        self._counter = 0
        self._lock = threading.Lock()

    def get(self, url: str) -> HttpResponse:
        resp = self.inner.get(url)
        with self._lock:
            self._counter += 1
            path = self.cassette_dir / f"{self._counter:04d}_{_slug(url)}.json"
        record = {
            "url": resp.url,
            "status": resp.status,
            "headers": resp.headers,
            "body_b64": base64.b64encode(resp.body).decode("ascii"),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=1)
        return resp


def write_cassette(cassette_dir: str | Path, url: str, body: bytes, status: int = 200,
                   headers: dict | None = None, name: str | None = None) -> Path:
    """Helper for building replay fixtures (used by tests and tooling)."""
    cassette_dir = Path(cassette_dir)
    cassette_dir.mkdir(parents=True, exist_ok=True)
    count = len(list(cassette_dir.glob("*.json")))
    path = cassette_dir / (name or f"{count + 1:04d}_{_slug(url)}.json")
    record = {
        "url": url,
        "status": status,
        "headers": headers or {},
        "body_b64": base64.b64encode(body).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1)
    return path
