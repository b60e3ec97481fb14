"""Evidence-context assembly for recommendation synthesis.

Three strategies build the context handed to the recommender:

- abstract_only: title, id-derived link, and abstract per paper; no fetches.
- full_paper: one paper as raw PDF bytes, or one to two papers as extracted
  text (concatenated LaTeX preferred, Markdown fallback).
- summaries: a task-specific summary per paper, produced by the model from
  the paper content and the questionnaire, then aggregated.

Every bundle respects a token budget; overflowing entries are dropped from
the tail with a warning rather than failing the build.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .arxiv import SourceBundle, abs_url
from .errors import ConnectorError, ContextEmptyError, ContextError
from .gateway import Attachment, ChatRequest, estimate_tokens
from .retrieval import ShortList

ABSTRACT_ONLY = "abstract_only"
FULL_PAPER = "full_paper"
SUMMARIES = "summaries"

PDF_MODE = "pdf"
TEXT_MODE = "text"

DEFAULT_BUDGET_TOKENS = 100_000
SUMMARY_CHAR_CAP = 3_500
_ELLIPSIS = " ..."

SUMMARY_SYSTEM_TEXT = """\
You are preparing evidence for a research consultation. Write a one-page,
task-specific summary of the attached paper: focus on the methods, results,
and practical details that matter for the project described in the
questionnaire below. Plain text, no preamble.
"""


@dataclass(frozen=True)
class ContextStrategy:
    variant: str
    mode: str | None = None  # pdf | text, full_paper only

    def __post_init__(self):
        if self.variant not in (ABSTRACT_ONLY, FULL_PAPER, SUMMARIES):
            raise ValueError(f"unknown context strategy {self.variant!r}")
        if self.variant == FULL_PAPER:
            if self.mode not in (PDF_MODE, TEXT_MODE):
                raise ValueError("full_paper strategy requires mode 'pdf' or 'text'")
        elif self.mode is not None:
            raise ValueError(f"{self.variant} does not take a mode")

    @property
    def label(self) -> str:
        return self.variant if self.mode is None else f"{self.variant}({self.mode})"


@dataclass(frozen=True)
class ContextBlock:
    arxiv_id: str
    heading: str
    body_text: str = ""
    pdf_bytes: bytes = b""

    def token_estimate(self) -> int:
        if self.pdf_bytes:
            return estimate_tokens(math.ceil(len(self.pdf_bytes) * 4 / 3))
        return estimate_tokens(len(self.heading) + len(self.body_text))


@dataclass
class ContextBundle:
    strategy: ContextStrategy
    blocks: list[ContextBlock] = field(default_factory=list)
    token_estimate: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [b.arxiv_id for b in self.blocks]

    def render_text(self) -> str:
        """Deterministic plain-text rendering of all text blocks."""
        parts = []
        for block in self.blocks:
            if block.pdf_bytes:
                continue
            parts.append(f"### {block.heading}\n{block.body_text}\n")
        return "\n".join(parts)


def _finalize(strategy, blocks, warnings) -> ContextBundle:
    total = sum(b.token_estimate() for b in blocks)
    return ContextBundle(
        strategy=strategy, blocks=blocks, token_estimate=total, warnings=warnings
    )


def _drop_tail_over_budget(blocks, budget_tokens, warnings) -> list[ContextBlock]:
    """Enforce the budget: truncate a lone oversized head, drop the tail."""
    kept: list[ContextBlock] = []
    running = 0
    dropped: list[str] = []
    for block in blocks:
        cost = block.token_estimate()
        if not kept and cost > budget_tokens and not block.pdf_bytes:
            keep_chars = max(budget_tokens * 4 - len(block.heading), 0)
            block = ContextBlock(
                arxiv_id=block.arxiv_id,
                heading=block.heading,
                body_text=block.body_text[:keep_chars],
            )
            warnings.append(
                f"truncated {block.arxiv_id} to fit the context budget"
            )
            cost = block.token_estimate()
        if kept and running + cost > budget_tokens:
            dropped.append(block.arxiv_id)
            continue
        kept.append(block)
        running += cost
    if dropped:
        warnings.append(
            "context budget exceeded; dropped papers: " + ", ".join(dropped)
        )
    return kept


def build_abstract_context(
    shortlist: ShortList, budget_tokens: int = DEFAULT_BUDGET_TOKENS
) -> ContextBundle:
    """Metadata-only context: one block per paper, no network fetches."""
    if not shortlist.papers:
        raise ValueError("shortlist is empty")
    strategy = ContextStrategy(ABSTRACT_ONLY)
    blocks = [
        ContextBlock(
            arxiv_id=p.arxiv_id,
            heading=f"{p.title} ({p.arxiv_id})",
            body_text=(
                f"Title: {p.title}\n"
                f"arXiv: {p.arxiv_id} ({abs_url(p.arxiv_id)})\n"
                f"Abstract: {p.abstract}"
            ),
        )
        for p in shortlist.papers
    ]
    warnings: list[str] = []
    blocks = _drop_tail_over_budget(blocks, budget_tokens, warnings)
    return _finalize(strategy, blocks, warnings)


def build_fullpaper_context(
    paper_ids: list[str],
    mode: str,
    connector,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
) -> ContextBundle:
    """Whole-paper context: one PDF block, or one to two extracted-text blocks."""
    strategy = ContextStrategy(FULL_PAPER, mode=mode)
    if mode == PDF_MODE:
        if len(paper_ids) != 1:
            raise ValueError("pdf mode takes exactly one paper id")
        (arxiv_id,) = paper_ids
        pdf = connector.fetch_pdf(arxiv_id)
        block = ContextBlock(
            arxiv_id=arxiv_id, heading=f"Full paper (PDF): {arxiv_id}", pdf_bytes=pdf
        )
        if block.token_estimate() > budget_tokens:
            raise ContextError(
                f"pdf for {arxiv_id} exceeds the context budget "
                f"({block.token_estimate()} > {budget_tokens} tokens)"
            )
        return _finalize(strategy, [block], [])
    if not 1 <= len(paper_ids) <= 2:
        raise ValueError("text mode takes one or two paper ids")
    blocks = []
    for arxiv_id in paper_ids:
        bundle = connector.fetch_source(arxiv_id)
        blocks.append(
            ContextBlock(
                arxiv_id=arxiv_id,
                heading=f"Full paper ({bundle.kind}): {arxiv_id}",
                body_text=bundle.text,
            )
        )
    warnings: list[str] = []
    blocks = _drop_tail_over_budget(blocks, budget_tokens, warnings)
    return _finalize(strategy, blocks, warnings)


def summarize_paper(formatted_qa: str, source, gateway) -> str:
    """One gateway call producing a task-specific summary, capped at one page."""
    if isinstance(source, SourceBundle):
        content_text, pdf = source.text, b""
    elif isinstance(source, bytes):
        content_text, pdf = "", source
    else:
        raise TypeError("source must be a SourceBundle or pdf bytes")
    if not content_text.strip() and not pdf:
        raise ValueError("source is empty")
    attachments = ()
    if pdf:
        attachments = (Attachment(data=pdf, media_kind="pdf"),)
        user_text = f"{formatted_qa}\n\nThe paper is attached as a PDF."
    else:
        user_text = f"{formatted_qa}\n\nPaper content:\n\n{content_text}"
    request = ChatRequest(
        system_text=SUMMARY_SYSTEM_TEXT,
        user_text=user_text,
        attachments=attachments,
    )
    summary = gateway.complete(request)
    if len(summary) > SUMMARY_CHAR_CAP:
        summary = summary[: SUMMARY_CHAR_CAP - len(_ELLIPSIS)] + _ELLIPSIS
    return summary


def _qa_hash(formatted_qa: str) -> str:
    return hashlib.sha256(formatted_qa.encode("utf-8")).hexdigest()[:16]


class SummaryCache:
    """Directory of cached summaries keyed by (arxiv_id, questionnaire hash).

    Layout: <id-slug>_<hash>.txt holds the summary; a .json sidecar records
    {id, hash, created_at}.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _stem(self, arxiv_id: str, qa_hash: str) -> str:
        return f"{arxiv_id.replace('/', '_')}_{qa_hash}"

    def get(self, arxiv_id: str, qa_hash: str) -> str | None:
        path = self.directory / (self._stem(arxiv_id, qa_hash) + ".txt")
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, arxiv_id: str, qa_hash: str, summary: str) -> None:
        stem = self._stem(arxiv_id, qa_hash)
        (self.directory / (stem + ".txt")).write_text(summary, encoding="utf-8")
        sidecar = {"id": arxiv_id, "hash": qa_hash, "created_at": time.time()}
        with open(self.directory / (stem + ".json"), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh)


def _paper_content(connector, arxiv_id: str):
    """Fetch the richest available content: source text, else raw PDF bytes."""
    try:
        return connector.fetch_source(arxiv_id)
    except ConnectorError as source_exc:
        try:
            return connector.fetch_pdf(arxiv_id)
        except ConnectorError:
            raise source_exc


def build_summaries_context(
    shortlist: ShortList,
    formatted_qa: str,
    connector,
    gateway,
    cache: SummaryCache | None = None,
    skip_failures: bool = True,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
) -> ContextBundle:
    """Summaries strategy: fetch, summarize, and aggregate in shortlist order."""
    if not shortlist.papers:
        raise ValueError("shortlist is empty")
    strategy = ContextStrategy(SUMMARIES)
    qa_hash = _qa_hash(formatted_qa)
    warnings: list[str] = []
    blocks: list[ContextBlock] = []
    for paper in shortlist.papers:
        summary = cache.get(paper.arxiv_id, qa_hash) if cache else None
        if summary is None:
            try:
                source = _paper_content(connector, paper.arxiv_id)
                summary = summarize_paper(formatted_qa, source, gateway)
            except (ConnectorError, ContextError, ValueError) as exc:
                if not skip_failures:
                    raise
                warnings.append(f"skipped {paper.arxiv_id}: {exc}")
                continue
            if cache:
                cache.put(paper.arxiv_id, qa_hash, summary)
        blocks.append(
            ContextBlock(
                arxiv_id=paper.arxiv_id,
                heading=f"Task-specific summary: {paper.title} ({paper.arxiv_id})",
                body_text=summary,
            )
        )
    blocks = _drop_tail_over_budget(blocks, budget_tokens, warnings)
    if not blocks:
        raise ContextEmptyError(
            "no paper in the shortlist yielded a context block: "
            + "; ".join(warnings)
        )
    return _finalize(strategy, blocks, warnings)
