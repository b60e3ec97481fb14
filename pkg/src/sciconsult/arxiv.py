"""arXiv connector: Atom search, e-print source download, LaTeX concatenation.

Source handling prefers the LaTeX archive: all .tex members are concatenated
in lexicographic filename order, each preceded by a "%% FILE: <name>" marker
line (tables and equations survive exactly; imports and comments are kept).
When no usable LaTeX exists the connector falls back to PDF plus a pluggable
PDF-to-Markdown converter.
"""

from __future__ import annotations

import gzip
import io
import re
import subprocess
import tarfile
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    ConversionFailedError,
    ConversionUnavailableError,
    FeedParseError,
    HttpStatusError,
    NonPdfPayloadError,
    SourceUnavailableError,
)
from .net import HttpResponse

ATOM_NS = "{http://www.w3.org/2005/Atom}"

SEARCH_URL = "http://export.arxiv.org/api/query?search_query={query}&start={start}&max_results={max_results}"
EPRINT_URL = "http://export.arxiv.org/e-print/{arxiv_id}"
PDF_URL = "http://arxiv.org/pdf/{arxiv_id}"

# new-style (2007-) and old-style (archive/NNNNNNN) identifiers
_NEW_ID = re.compile(r"^(\d{4}\.\d{4,5})(v\d+)?$")
_OLD_ID = re.compile(r"^([a-z-]+(?:\.[A-Z]{2})?/\d{7})(v\d+)?$")

LATEX_CONCAT = "latex_concat"
MARKDOWN = "markdown"
PDF_BYTES = "pdf_bytes"

FILE_MARKER = "%% FILE: "


def split_arxiv_id(raw: str) -> tuple[str, int | None]:
    """Return (versionless id, version or None); raises ValueError on bad ids."""
    raw = raw.strip()
    for pattern in (_NEW_ID, _OLD_ID):
        m = pattern.match(raw)
        if m:
            version = int(m.group(2)[1:]) if m.group(2) else None
            return m.group(1), version
    raise ValueError(f"not a canonical arXiv id: {raw!r}")


def abs_url(arxiv_id: str) -> str:
    return f"https://arxiv.org/abs/{arxiv_id}"


@dataclass(frozen=True)
class PaperMetadata:
    arxiv_id: str  # versionless canonical id
    title: str
    abstract: str
    version: int | None = None

    @property
    def url(self) -> str:
        return abs_url(self.arxiv_id)


@dataclass
class SourceBundle:
    arxiv_id: str
    kind: str  # latex_concat | markdown | pdf_bytes
    text: str = ""
    pdf: bytes = b""
    manifest: list[str] = field(default_factory=list)


def _squash_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text or "").strip()


def parse_atom_feed(body: bytes) -> list[PaperMetadata]:
    """Parse an arXiv Atom feed, preserving entry order, deduplicated by id."""
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise FeedParseError(f"Atom feed did not parse: {exc}") from exc
    papers: list[PaperMetadata] = []
    seen: set[str] = set()
    for entry in root.findall(f"{ATOM_NS}entry"):
        raw_id = (entry.findtext(f"{ATOM_NS}id") or "").rsplit("/abs/", 1)[-1]
        try:
            arxiv_id, version = split_arxiv_id(raw_id)
        except ValueError:
            continue
        if arxiv_id in seen:
            continue
        seen.add(arxiv_id)
        papers.append(
            PaperMetadata(
                arxiv_id=arxiv_id,
                title=_squash_ws(entry.findtext(f"{ATOM_NS}title") or ""),
                abstract=_squash_ws(entry.findtext(f"{ATOM_NS}summary") or ""),
                version=version,
            )
        )
    return papers


def concat_tex_members(members: dict[str, str]) -> tuple[str, list[str]]:
    """Concatenate .tex contents in lexicographic name order with file markers."""
    manifest = sorted(members)
    text = "".join(f"{FILE_MARKER}{name}\n{members[name]}\n" for name in manifest)
    return text, manifest


class SubprocessConverter:
    """PDF-to-Markdown hook backed by an external command.

    The command receives the PDF path as its last argument and must print
    Markdown on stdout.
    """

    def __init__(self, argv: list[str]):
        self.argv = list(argv)

    def __call__(self, pdf: bytes) -> str:
        with tempfile.NamedTemporaryFile(suffix=".pdf", delete=False) as fh:
            fh.write(pdf)
            pdf_path = fh.name
        try:
            proc = subprocess.run(
                self.argv + [pdf_path], capture_output=True, text=True
            )
        finally:
            Path(pdf_path).unlink(missing_ok=True)
        if proc.returncode != 0:
            raise ConversionFailedError(
                f"converter exited {proc.returncode}: {proc.stderr.strip()}"
            )
        return proc.stdout


def to_markdown(pdf: bytes, converter=None) -> str:
    """Run the configured converter hook; output is returned verbatim."""
    if converter is None:
        raise ConversionUnavailableError("no PDF-to-Markdown converter configured")
    return converter(pdf)


def _looks_like_latex(text: str) -> bool:
    return "\\documentclass" in text or "\\begin{document}" in text


class ArxivConnector:
    """arXiv API client over a pluggable HTTP transport."""

    def __init__(self, transport, max_results_cap: int = 100, converter=None):
        self.transport = transport
        self.max_results_cap = max_results_cap
        self.converter = converter

    def _get(self, url: str) -> HttpResponse:
        resp = self.transport.get(url)
        if resp.status != 200:
            raise HttpStatusError(url, resp.status)
        return resp

    def search(self, query: str, max_results: int) -> list[PaperMetadata]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        if not (1 <= max_results <= self.max_results_cap):
            raise ValueError(
                f"max_results must be in [1, {self.max_results_cap}], got {max_results}"
            )
        url = SEARCH_URL.format(query=query.replace(" ", "+"), start=0, max_results=max_results)
        resp = self._get(url)
        return parse_atom_feed(resp.body)[:max_results]

    def fetch_pdf(self, arxiv_id: str) -> bytes:
        base, _ = split_arxiv_id(arxiv_id)
        resp = self._get(PDF_URL.format(arxiv_id=base))
        if not resp.body.startswith(b"%PDF"):
            raise NonPdfPayloadError(f"payload for {base} lacks %PDF magic")
        return resp.body

    def fetch_source(self, arxiv_id: str) -> SourceBundle:
        """Download the e-print; prefer concatenated LaTeX, else Markdown fallback."""
        base, _ = split_arxiv_id(arxiv_id)
        causes: list[str] = []
        try:
            resp = self._get(EPRINT_URL.format(arxiv_id=base))
            bundle = self._bundle_from_eprint(base, resp.body)
            if bundle is not None:
                return bundle
            causes.append("e-print archive contains no .tex member")
        except (HttpStatusError, OSError) as exc:
            causes.append(f"e-print fetch failed: {exc}")
        try:
            pdf = self.fetch_pdf(base)
            text = to_markdown(pdf, self.converter)
            return SourceBundle(arxiv_id=base, kind=MARKDOWN, text=text)
        except Exception as exc:  # noqa: BLE001 - both causes reported together
            causes.append(f"pdf fallback failed: {exc}")
        raise SourceUnavailableError(base, causes)

    def _bundle_from_eprint(self, arxiv_id: str, payload: bytes) -> SourceBundle | None:
        """Decode an e-print payload; None means "no LaTeX here, try fallback"."""
        try:
            with tarfile.open(fileobj=io.BytesIO(payload), mode="r:*") as tar:
                members = {}
                for member in tar.getmembers():
                    if member.isfile() and member.name.endswith(".tex"):
                        handle = tar.extractfile(member)
                        if handle is not None:
                            members[member.name] = handle.read().decode("utf-8", "replace")
                if not members:
                    return None
                text, manifest = concat_tex_members(members)
                return SourceBundle(
                    arxiv_id=arxiv_id, kind=LATEX_CONCAT, text=text, manifest=manifest
                )
        except tarfile.TarError:
            pass
        # bare file: possibly gzipped single-file source, possibly a PDF
        body = payload
        try:
            body = gzip.decompress(payload)
        except OSError:
            pass
        if body.startswith(b"%PDF"):
            return None
        text = body.decode("utf-8", "replace")
        if _looks_like_latex(text):
            concat, manifest = concat_tex_members({"main.tex": text})
            return SourceBundle(
                arxiv_id=arxiv_id, kind=LATEX_CONCAT, text=concat, manifest=manifest
            )
        return None
