"""Evidence retrieval: query generation, arXiv search fan-out, shortlisting.

The pipeline is a monotone filter chain: queries produce a candidate pool
(deduplicated across queries, with provenance), and the pool is narrowed to a
shortlist by a structured model call over the consolidated abstracts. When the
abstract corpus would overflow the gateway's context window, the pool is split
into fitting batches, each batch is shortlisted, and a final merge call picks
the winners from the batch survivors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .arxiv import PaperMetadata, split_arxiv_id
from .errors import (
    ConnectorError,
    EmptyShortlistError,
    NoQueriesError,
    RetrievalFailedError,
    TokenLimitError,
    TransportError,
)
from .gateway import ChatRequest, estimate_tokens

DEFAULT_K_LIMIT = 50
DEFAULT_N_LIMIT = 50
DEFAULT_PER_QUERY_MAX = 10

_MAX_SHORTLIST_ROUNDS = 8
_SHORTLIST_OUTPUT_TOKENS = 2048

QUERY_LIST_SCHEMA = {
    "type": "object",
    "properties": {"queries": {"type": "array", "items": {"type": "string"}}},
    "required": ["queries"],
}

PAPER_ID_LIST_SCHEMA = {
    "type": "object",
    "properties": {"paper_ids": {"type": "array", "items": {"type": "string"}}},
    "required": ["paper_ids"],
}

QUERY_SYSTEM_TEXT = """\
You are a research librarian turning a project questionnaire into arXiv API
search queries. Follow arXiv query syntax best practices:
- use field prefixes: ti: (title), abs: (abstract), au: (author), cat: (category), all:
- combine terms with AND, OR, ANDNOT; group with parentheses
- put multi-word phrases in double quotes, e.g. abs:"retrieval augmented generation"
- prefer several focused queries over one broad query; cover the task, the data
  modality, the evaluation metrics, and close methodological neighbours

Generate at most {k_limit} queries. Respond with JSON only, in the form
{{"queries": ["...", "..."]}}.
"""

SHORTLIST_SYSTEM_TEXT = """\
You are screening arXiv candidates for relevance to a research project. The
user message contains the project questionnaire followed by candidate papers
(id, title, abstract). Select the papers most likely to ground concrete,
evidence-backed recommendations for this project.

Pick at most {n_limit} papers. Respond with JSON only, in the form
{{"paper_ids": ["...", "..."]}}, ordered from most to least relevant. Use only
ids that appear in the candidate list.
"""


@dataclass(frozen=True)
class QueryPlan:
    """Ordered arXiv search queries, capped at k_limit."""

    queries: tuple[str, ...]
    k_limit: int = DEFAULT_K_LIMIT

    def __post_init__(self):
        if not 1 <= len(self.queries) <= self.k_limit:
            raise ValueError(
                f"plan must contain between 1 and {self.k_limit} queries, "
                f"got {len(self.queries)}"
            )
        keys = [q.strip().casefold() for q in self.queries]
        if len(set(keys)) != len(keys):
            raise ValueError("queries must be pairwise distinct after case-fold/trim")


@dataclass
class CandidatePool:
    """Union of per-query results, deduplicated, with query provenance."""

    papers: list[PaperMetadata] = field(default_factory=list)
    provenance: dict[str, set[int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [p.arxiv_id for p in self.papers]


@dataclass
class ShortList:
    """Relevance-filtered papers, capped at n_limit, ordered by the model."""

    papers: list[PaperMetadata] = field(default_factory=list)
    n_limit: int = DEFAULT_N_LIMIT
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.papers) > self.n_limit:
            raise ValueError(
                f"shortlist holds {len(self.papers)} papers, limit {self.n_limit}"
            )

    @property
    def ids(self) -> list[str]:
        return [p.arxiv_id for p in self.papers]


def generate_queries(formatted_qa: str, gateway, k_limit: int = DEFAULT_K_LIMIT) -> QueryPlan:
    """One structured call; clean to trimmed, case-fold-unique, first k_limit."""
    if not formatted_qa.strip():
        raise ValueError("formatted_qa must be non-empty")
    if k_limit < 1:
        raise ValueError("k_limit must be >= 1")
    request = ChatRequest(
        system_text=QUERY_SYSTEM_TEXT.format(k_limit=k_limit),
        user_text=formatted_qa,
        output_schema=QUERY_LIST_SCHEMA,
    )
    raw = gateway.complete_structured(request)["queries"]
    queries: list[str] = []
    seen: set[str] = set()
    for item in raw:
        query = str(item).strip()
        key = query.casefold()
        if not query or key in seen:
            continue
        seen.add(key)
        queries.append(query)
        if len(queries) == k_limit:
            break
    if not queries:
        raise NoQueriesError("query generation produced no usable queries")
    return QueryPlan(queries=tuple(queries), k_limit=k_limit)


def run_searches(
    plan: QueryPlan,
    connector,
    per_query_max: int = DEFAULT_PER_QUERY_MAX,
    workers: int = 1,
) -> CandidatePool:
    """Search every query once and merge results in query-index order.

    Individual query failures become warnings as long as at least one query
    succeeds; the merge keeps the first occurrence of each arxiv id and
    records every query index that returned it.
    """
    if per_query_max < 1:
        raise ValueError("per_query_max must be >= 1")

    def one(query: str):
        return connector.search(query, max_results=per_query_max)

    outcomes: list[tuple[list[PaperMetadata] | None, str | None]] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one, q) for q in plan.queries]
            for index, future in enumerate(futures):
                try:
                    outcomes.append((future.result(), None))
                except (ConnectorError, TransportError) as exc:
                    outcomes.append((None, _query_failure(index, plan, exc)))
    else:
        for index, query in enumerate(plan.queries):
            try:
                outcomes.append((one(query), None))
            except (ConnectorError, TransportError) as exc:
                outcomes.append((None, _query_failure(index, plan, exc)))

    papers: list[PaperMetadata] = []
    provenance: dict[str, set[int]] = {}
    warnings: list[str] = []
    succeeded = 0
    for index, (results, failure) in enumerate(outcomes):
        if failure is not None:
            warnings.append(failure)
            continue
        succeeded += 1
        for paper in results:
            bucket = provenance.setdefault(paper.arxiv_id, set())
            if not bucket:
                papers.append(paper)
            bucket.add(index)
    if succeeded == 0:
        raise RetrievalFailedError("all queries failed: " + "; ".join(warnings))
    return CandidatePool(papers=papers, provenance=provenance, warnings=warnings)


def _query_failure(index: int, plan: QueryPlan, exc: Exception) -> str:
    return f"query {index} ({plan.queries[index]!r}) failed: {exc}"


def shortlist(pool: CandidatePool, formatted_qa: str, gateway, n_limit: int = DEFAULT_N_LIMIT) -> ShortList:
    """Narrow the pool to at most n_limit papers via structured model calls."""
    if not pool.papers:
        raise ValueError("candidate pool is empty")
    if n_limit < 1:
        raise ValueError("n_limit must be >= 1")
    warnings: list[str] = []
    papers = list(pool.papers)
    for _ in range(_MAX_SHORTLIST_ROUNDS):
        request = _shortlist_request(papers, formatted_qa, n_limit)
        if _fits(request, gateway):
            ids = gateway.complete_structured(request)["paper_ids"]
            selected = _resolve_ids(ids, papers, n_limit, warnings)
            if not selected:
                raise EmptyShortlistError(
                    "shortlisting selected no paper present in the candidate pool"
                )
            return ShortList(papers=selected, n_limit=n_limit, warnings=warnings)
        survivors = _batched_round(papers, formatted_qa, gateway, n_limit, warnings)
        if len(survivors) >= len(papers):
            # every batch kept everything; force the cap so the merge shrinks
            warnings.append(
                f"batched shortlisting made no progress; truncating to first {n_limit}"
            )
            survivors = survivors[:n_limit]
        papers = survivors
    raise TokenLimitError(
        "shortlist corpus still exceeds the context window after "
        f"{_MAX_SHORTLIST_ROUNDS} batching rounds"
    )


def _fits(request: ChatRequest, gateway) -> bool:
    total = request.estimated_input_tokens() + request.max_output_tokens
    return total <= gateway.context_window_tokens


def _abstract_block(paper: PaperMetadata) -> str:
    return (
        f"arxiv_id: {paper.arxiv_id}\n"
        f"title: {paper.title}\n"
        f"abstract: {paper.abstract}\n"
    )


def _shortlist_request(papers: list[PaperMetadata], formatted_qa: str, n_limit: int) -> ChatRequest:
    corpus = "\n".join(_abstract_block(p) for p in papers)
    user_text = (
        f"{formatted_qa}\n\nCandidate papers ({len(papers)}):\n\n{corpus}"
    )
    return ChatRequest(
        system_text=SHORTLIST_SYSTEM_TEXT.format(n_limit=n_limit),
        user_text=user_text,
        output_schema=PAPER_ID_LIST_SCHEMA,
        max_output_tokens=_SHORTLIST_OUTPUT_TOKENS,
    )


def _batched_round(
    papers: list[PaperMetadata],
    formatted_qa: str,
    gateway,
    n_limit: int,
    warnings: list[str],
) -> list[PaperMetadata]:
    """Split into fitting batches, shortlist each, concatenate survivors."""
    batches = _pack_batches(papers, formatted_qa, gateway, n_limit)
    survivors: list[PaperMetadata] = []
    seen: set[str] = set()
    for batch in batches:
        request = _shortlist_request(batch, formatted_qa, n_limit)
        ids = gateway.complete_structured(request)["paper_ids"]
        for paper in _resolve_ids(ids, batch, n_limit, warnings):
            if paper.arxiv_id not in seen:
                seen.add(paper.arxiv_id)
                survivors.append(paper)
    return survivors


def _pack_batches(
    papers: list[PaperMetadata], formatted_qa: str, gateway, n_limit: int
) -> list[list[PaperMetadata]]:
    """Greedy packing by token estimate; every batch holds at least one paper."""
    overhead_chars = len(SHORTLIST_SYSTEM_TEXT.format(n_limit=n_limit)) + len(
        formatted_qa
    ) + 200  # scaffolding text around the corpus
    budget = gateway.context_window_tokens - _SHORTLIST_OUTPUT_TOKENS
    batches: list[list[PaperMetadata]] = []
    current: list[PaperMetadata] = []
    current_chars = overhead_chars
    for paper in papers:
        block_chars = len(_abstract_block(paper)) + 1
        if current and estimate_tokens(current_chars + block_chars) > budget:
            batches.append(current)
            current = []
            current_chars = overhead_chars
        current.append(paper)
        current_chars += block_chars
    if current:
        batches.append(current)
    return batches


def _resolve_ids(
    ids: list, papers: list[PaperMetadata], n_limit: int, warnings: list[str]
) -> list[PaperMetadata]:
    """Map returned ids onto the batch, dropping unknowns with a warning."""
    by_id = {p.arxiv_id: p for p in papers}
    selected: list[PaperMetadata] = []
    seen: set[str] = set()
    for raw in ids:
        raw_id = str(raw).strip()
        try:
            base, _ = split_arxiv_id(raw_id)
        except ValueError:
            base = raw_id
        if base not in by_id:
            warnings.append(f"ignoring paper id not in candidate pool: {raw_id}")
            continue
        if base in seen:
            continue
        seen.add(base)
        selected.append(by_id[base])
        if len(selected) == n_limit:
            break
    return selected
