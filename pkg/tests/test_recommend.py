"""Recommender tests: prompt rendering, parsing, linting, persistence."""

import dataclasses
import json
from pathlib import Path

import pytest

from sciconsult.context import (
    ContextBlock,
    ContextBundle,
    ContextStrategy,
    build_abstract_context,
)
from sciconsult.arxiv import PaperMetadata
from sciconsult.errors import RecommendationParseError
from sciconsult.gateway import LlmGateway, ScriptedBackend
from sciconsult.recommend import (
    RecSection,
    RecommendationDoc,
    compose_markdown,
    generate,
    lint_citations,
    load_recommendation,
    parse_recommendation,
    render_prompt,
    save_recommendation,
)
from sciconsult.retrieval import ShortList

GOLDEN_DIR = Path(__file__).parent / "golden_recs"
GOLDEN_CASES = sorted(p.stem for p in GOLDEN_DIR.glob("*.md"))

QA = "## Introduction\nQ: Problem?\nA: Churn prediction."


def text_bundle(*texts):
    blocks = [
        ContextBlock(arxiv_id=f"2301.{i:05d}", heading=f"Paper {i}", body_text=t)
        for i, t in enumerate(texts, start=1)
    ]
    return ContextBundle(
        strategy=ContextStrategy("summaries"),
        blocks=blocks,
        token_estimate=sum(b.token_estimate() for b in blocks),
    )


def pdf_bundle():
    block = ContextBlock(
        arxiv_id="2301.00001", heading="Full paper (PDF): 2301.00001",
        pdf_bytes=b"%PDF-1.4 tiny",
    )
    return ContextBundle(
        strategy=ContextStrategy("full_paper", mode="pdf"),
        blocks=[block],
        token_estimate=block.token_estimate(),
    )


def full_section():
    return RecSection(
        description="Do the thing.",
        step_by_step="1. First.\n2. Second.",
        coding_details="```text\ndef run(): ...\n```",
        justification="It works well (Smith et al., 2023).",
        references="- Smith, A., Jones, B., Lee, C. (2023). A Paper. VenueX.",
    )


# ------------------------------------------------------------------ prompt


def test_render_prompt_contains_verbatim_instructions():
    prompt = render_prompt(QA, text_bundle("summary one"))
    assert "Do not hallucinate citations." in prompt
    assert "Never use placeholders or generic names such as (Author1 et al., Year)." in prompt
    assert prompt.index("## Best Solution") < prompt.index("## Strong Baseline")
    assert "<small><em>...</em></small>" in prompt
    assert "-" * 25 in prompt


def test_render_prompt_substitutes_both_slots():
    prompt = render_prompt(QA, text_bundle("THE SUMMARY BODY"))
    assert QA in prompt
    assert "THE SUMMARY BODY" in prompt
    assert "{formatted_qa}" not in prompt
    assert "{summaries_str}" not in prompt
    assert "[Context strategy: summaries]" in prompt


def test_render_prompt_empty_qa_uses_sentinel():
    prompt = render_prompt("   ", text_bundle("s"))
    assert "(no response)" in prompt


def test_render_prompt_is_byte_deterministic():
    bundle = text_bundle("alpha", "beta")
    assert render_prompt(QA, bundle) == render_prompt(QA, bundle)


def test_render_prompt_discloses_nonsummary_strategy():
    papers = [PaperMetadata(arxiv_id="2301.00001", title="T", abstract="A")]
    bundle = build_abstract_context(ShortList(papers=papers))
    prompt = render_prompt(QA, bundle)
    assert "[Context strategy: abstract_only]" in prompt


def test_render_prompt_rejects_empty_bundle():
    empty = ContextBundle(strategy=ContextStrategy("summaries"))
    with pytest.raises(ValueError):
        render_prompt(QA, empty)


def test_generate_is_one_pass_through_call():
    gateway = LlmGateway(ScriptedBackend(["RAW OUTPUT"]))
    raw = generate(QA, text_bundle("s"), gateway)
    assert raw == "RAW OUTPUT"
    assert gateway.call_count == 1
    assert gateway.audit_log[0].attachments == 0


def test_generate_pdf_strategy_attaches_exactly_one_pdf():
    gateway = LlmGateway(ScriptedBackend(["out"]))
    generate(QA, pdf_bundle(), gateway)
    assert gateway.audit_log[0].attachments == 1
    assert "attached as a PDF" in gateway.audit_log[0].user_text


# ------------------------------------------------------------ golden suite


@pytest.mark.parametrize("stem", GOLDEN_CASES)
def test_golden_document(stem):
    raw = (GOLDEN_DIR / f"{stem}.md").read_text(encoding="utf-8")
    spec = json.loads((GOLDEN_DIR / f"{stem}.json").read_text(encoding="utf-8"))

    if spec["parse"] == "error":
        with pytest.raises(RecommendationParseError) as exc_info:
            parse_recommendation(raw)
        assert spec["error_contains"] in str(exc_info.value)
        return

    doc = parse_recommendation(raw)
    if spec["thinking_contains"] is None:
        assert doc.thinking == ""
    else:
        assert spec["thinking_contains"] in doc.thinking
        # the thinking phase must not leak into any section body
        for section in (doc.best_solution, doc.strong_baseline):
            for value in dataclasses.asdict(section).values():
                assert spec["thinking_contains"] not in value

    if spec["all_fields_nonempty"]:
        for section in (doc.best_solution, doc.strong_baseline):
            for name, value in dataclasses.asdict(section).items():
                assert value.strip(), f"{stem}: empty field {name}"

    kinds = sorted(f.kind for f in lint_citations(doc))
    assert kinds == sorted(spec["lint_kinds"])

    if spec["round_trip"]:
        rendered = compose_markdown(
            doc.thinking, doc.best_solution, doc.strong_baseline
        )
        reparsed = parse_recommendation(rendered)
        assert reparsed.best_solution == doc.best_solution
        assert reparsed.strong_baseline == doc.strong_baseline
        assert reparsed.thinking == doc.thinking


def test_golden_suite_has_ten_documents():
    assert len(GOLDEN_CASES) == 10


# ---------------------------------------------------------------- parsing


def test_parse_out_of_order_headings_rejected():
    raw = "## Strong Baseline\n\n**Description**\nb\n\n## Best Solution\n\n**Description**\na\n"
    with pytest.raises(RecommendationParseError) as exc_info:
        parse_recommendation(raw)
    assert "precede" in str(exc_info.value)


def test_parse_tolerates_heading_trailing_colon():
    raw = (
        "## Best Solution:\n\n**Description**\nd\n\n"
        "## Strong Baseline:\n\n**Description**\nd2\n"
    )
    doc = parse_recommendation(raw)
    assert doc.best_solution.description == "d"
    assert doc.strong_baseline.description == "d2"


def test_parse_unknown_bold_label_stays_in_current_field():
    raw = (
        "## Best Solution\n\n**Description**\nintro line\n"
        "**Note:** a caveat that is content, not a field\n\n"
        "## Strong Baseline\n\n**Description**\nbase\n"
    )
    doc = parse_recommendation(raw)
    assert "a caveat" in doc.best_solution.description
    assert "**Note:**" in doc.best_solution.description


def test_parse_carries_strategy_and_evidence_through():
    raw = "## Best Solution\n\n**Description**\nx\n\n## Strong Baseline\n\n**Description**\ny\n"
    strategy = ContextStrategy("abstract_only")
    doc = parse_recommendation(raw, context_strategy=strategy, evidence_ids=("2301.00001",))
    assert doc.context_strategy == strategy
    assert doc.evidence_ids == ("2301.00001",)
    assert doc.raw_markdown == raw


def test_programmatic_compose_parse_round_trip():
    best = full_section()
    baseline = dataclasses.replace(
        full_section(),
        justification="Baseline logic (Cox, 1958).",
        references="- Cox, D. R. (1958). The regression analysis of binary sequences.",
    )
    rendered = compose_markdown("think hard first", best, baseline)
    doc = parse_recommendation(rendered)
    assert doc.thinking == "think hard first"
    assert doc.best_solution == best
    assert doc.strong_baseline == baseline


# ------------------------------------------------------------------- lint


def test_lint_matched_citation_produces_no_findings():
    doc = RecommendationDoc(
        thinking="",
        best_solution=full_section(),
        strong_baseline=full_section(),
        raw_markdown="",
    )
    assert lint_citations(doc) == []


def test_lint_flags_placeholder_and_names_it():
    section = dataclasses.replace(
        full_section(), justification="Works great (Author1 et al., Year)."
    )
    doc = RecommendationDoc(
        thinking="", best_solution=section,
        strong_baseline=full_section(), raw_markdown="",
    )
    findings = lint_citations(doc)
    assert len(findings) == 1
    assert findings[0].kind == "placeholder"
    assert "(Author1 et al., Year)" in findings[0].message


def test_lint_flags_citation_without_reference_entry():
    section = dataclasses.replace(full_section(), references="")
    doc = RecommendationDoc(
        thinking="", best_solution=section,
        strong_baseline=full_section(), raw_markdown="",
    )
    findings = lint_citations(doc)
    assert [f.kind for f in findings] == ["unmatched_citation"]
    assert "Smith" in findings[0].message


def test_lint_checks_year_as_well_as_surname():
    section = dataclasses.replace(
        full_section(),
        references="- Smith, A., Jones, B., Lee, C. (2019). A Paper. VenueX.",
    )
    doc = RecommendationDoc(
        thinking="", best_solution=section,
        strong_baseline=full_section(), raw_markdown="",
    )
    assert [f.kind for f in lint_citations(doc)] == ["unmatched_citation"]


# ------------------------------------------------------------- persistence


def test_save_load_round_trip(tmp_path):
    doc = RecommendationDoc(
        thinking="planning",
        best_solution=full_section(),
        strong_baseline=full_section(),
        raw_markdown=compose_markdown("planning", full_section(), full_section()),
        context_strategy=ContextStrategy("full_paper", mode="text"),
        evidence_ids=("2301.00001", "2301.00002"),
    )
    save_recommendation(doc, tmp_path / "rec")
    assert (tmp_path / "rec" / "recommendation.md").exists()
    sidecar = json.loads(
        (tmp_path / "rec" / "recommendation.json").read_text(encoding="utf-8")
    )
    assert sidecar["strategy"] == "full_paper(text)"
    assert sidecar["created_at"] > 0

    loaded = load_recommendation(tmp_path / "rec")
    assert loaded.thinking == doc.thinking
    assert loaded.best_solution == doc.best_solution
    assert loaded.strong_baseline == doc.strong_baseline
    assert loaded.raw_markdown == doc.raw_markdown
    assert loaded.context_strategy == doc.context_strategy
    assert loaded.evidence_ids == doc.evidence_ids
