"""Recommendation synthesis: prompt rendering, generation, parsing, linting.

The prompt template below is the verbatim consultation prompt. It asks for a
thinking phase wrapped in <small><em>...</em></small>, then two level-2
sections ("## Best Solution", "## Strong Baseline"), each carrying five bold
labels: Description, Step-by-Step Solution, Coding Details, Justification,
References. The parser tolerates label case and trailing colons, and ignores
anything inside fenced code blocks.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .context import ContextBundle, ContextStrategy, FULL_PAPER, PDF_MODE
from .errors import RecommendationParseError
from .gateway import Attachment, ChatRequest

BEST_HEADING = "Best Solution"
BASELINE_HEADING = "Strong Baseline"

SEPARATOR = "-" * 25

PROMPT_TEMPLATE = """\
Analyze the following questionnaire response and the provided summaries of relevant research papers. Your goal is to recommend the best approach to solve the user task. You will provide two separate recommendations: Best Solution and Strong Baseline, each with a clear description, justification, and references.

Begin each response with a thinking phase inside <small><em>...</em></small> tags. In this phase, think about what the best solution and strong baselines for the task might be, which citations or supporting evidence you plan to use, and how you will justify your recommendations. Clearly identify and list the citations you intend to reference, using the appropriate citation format. Inside the thinking use simple paragraph, do not use markdown format.

1. Best Approach to Solve the Task:
   - This recommendation should present the best solution for the task and is likely to achieve state-of-the-art results. You must always provide justification with relevant citations from recent research papers published in reputable conferences or journals.

2. Strong Baseline:
   - This recommendation should suggest a strong and widely recognized baseline. Again, always provide justification with relevant citations or logical arguments explaining why this is a strong baseline. Common examples of baselines include, but are not limited to: gradient boosting methods (e.g., XGBoost), random forest, simple prompting, chain-of-thought prompting, retrieval-augmented generation (RAG), knowledge distillation, diffusion-based generative approaches, fine-tuning with contrastive learning, reinforcement learning (e.g., PPO, SAC, DQN), time series forecasting with modern boosting or neural approaches, or any other well-established and competitive approach relevant to the task.

-------------------------
**Questionnaire Response:**
{formatted_qa}
-------------------------
**Summaries of Relevant Papers:**
{summaries_str}
-------------------------

Your response should follow the Markdown format below for each of the two recommendations.

## Best Solution

## Strong Baseline

Within each recommendation, include the following sections:

**Description**
A brief one or two paragraph description of the recommended solution.

**Step-by-Step Solution**
Detail the solution clearly enough for a Machine Learning or AI Engineer or SDE to implement. Ideally even a Product Manager should understand the solution and communicate clearly to an SDE to implement. Typical details often include but not limited to:
- **Data:** Details regarding the data, such as what data is used, any required preprocessing steps, and the expected inputs and outputs, etc. Maybe even show an example if possible
- **Modeling:** Details regarding the modeling approach, such as LLMs or model architectures, learning algorithms, objective functions, etc.
- **Prediction:** How predictions are made—whether they are direct outputs from the model or require further processing, etc.
- **Evaluation:** Details regarding evaluation, such as ground truth, metrics to use, etc.
- Any other relevant implementation details needed for clarity. The above steps are general guidelines based on the project some parts may not be relevant or in some cases you might have to include more details to be clear.

**Coding Details**
Provide a brief design doc describing key components and their roles, with a concise pseudocode block showing only class/function headers and core control flow (no imports or full implementations). Put the pseudocode in a fenced Markdown code block.

**Justification**
A strong, evidence-based justification for why this is the most suitable recommendation, supported by relevant citations. Always use actual author names and years from the source when citing. Format citations as follows: (Author, Year) for one author; (Author & Author, Year) for two authors; (Author et al., Year) for three or more authors. Never use placeholders or generic names such as (Author1 et al., Year). Do not hallucinate citations.

**References**
List all cited sources here.

-------------------------
"""


@dataclass(frozen=True)
class RecSection:
    description: str = ""
    step_by_step: str = ""
    coding_details: str = ""
    justification: str = ""
    references: str = ""


@dataclass
class RecommendationDoc:
    thinking: str
    best_solution: RecSection
    strong_baseline: RecSection
    raw_markdown: str
    context_strategy: ContextStrategy | None = None
    evidence_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class LintFinding:
    kind: str  # placeholder | unmatched_citation
    message: str


def render_prompt(formatted_qa: str, bundle: ContextBundle) -> str:
    """Substitute the questionnaire and the context into the template."""
    if not bundle.blocks:
        raise ValueError("context bundle is empty")
    qa = formatted_qa if formatted_qa.strip() else "(no response)"
    if bundle.strategy.variant == FULL_PAPER and bundle.strategy.mode == PDF_MODE:
        body = "The full paper is attached as a PDF document."
    else:
        body = bundle.render_text()
    summaries_str = f"[Context strategy: {bundle.strategy.label}]\n\n{body}"
    return PROMPT_TEMPLATE.replace("{formatted_qa}", qa).replace(
        "{summaries_str}", summaries_str
    )


def generate(formatted_qa: str, bundle: ContextBundle, gateway) -> str:
    """One gateway call; PDF blocks ride along as attachments."""
    prompt = render_prompt(formatted_qa, bundle)
    attachments = tuple(
        Attachment(data=block.pdf_bytes, media_kind="pdf")
        for block in bundle.blocks
        if block.pdf_bytes
    )
    request = ChatRequest(
        system_text="",
        user_text=prompt,
        attachments=attachments,
        max_output_tokens=8192,
    )
    return gateway.complete(request)


_THINKING_RE = re.compile(
    r"\A\s*<small>\s*<em>(.*?)</em>\s*</small>\s*", re.DOTALL | re.IGNORECASE
)

_LABEL_FIELDS = {
    "description": "description",
    "step-by-step solution": "step_by_step",
    "step by step solution": "step_by_step",
    "coding details": "coding_details",
    "justification": "justification",
    "references": "references",
}

_LABEL_RE = re.compile(r"^\s*\*\*\s*([^*]+?)\s*\*\*\s*:?\s*(.*)$")
_FENCE_RE = re.compile(r"^\s*```")
_RULE_RE = re.compile(r"^-{3,}\s*$")


def _heading_pattern(title: str) -> re.Pattern:
    return re.compile(rf"^##\s+{re.escape(title)}\s*:?\s*$", re.IGNORECASE)


def _heading_lines(lines: list[str], title: str) -> list[int]:
    pattern = _heading_pattern(title)
    hits = []
    in_fence = False
    for i, line in enumerate(lines):
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            continue
        if not in_fence and pattern.match(line.strip()):
            hits.append(i)
    return hits


def _field_key(line: str) -> tuple[str | None, str]:
    m = _LABEL_RE.match(line)
    if not m:
        return None, ""
    label = re.sub(r"\s+", " ", m.group(1)).strip().rstrip(":").casefold()
    return _LABEL_FIELDS.get(label), m.group(2)


def _parse_section(lines: list[str]) -> RecSection:
    # drop trailing blank lines and horizontal rules
    while lines and (not lines[-1].strip() or _RULE_RE.match(lines[-1].strip())):
        lines.pop()
    fields: dict[str, list[str]] = {
        name: [] for name in set(_LABEL_FIELDS.values())
    }
    preamble: list[str] = []
    current: str | None = None
    in_fence = False
    for line in lines:
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            (fields[current] if current else preamble).append(line)
            continue
        if not in_fence:
            key, rest = _field_key(line)
            if key:
                current = key
                if rest.strip():
                    fields[current].append(rest.strip())
                continue
        (fields[current] if current else preamble).append(line)
    cleaned = {name: "\n".join(body).strip() for name, body in fields.items()}
    lead = "\n".join(preamble).strip()
    if lead:
        cleaned["description"] = (lead + "\n" + cleaned["description"]).strip()
    return RecSection(**cleaned)


def parse_recommendation(
    raw: str,
    context_strategy: ContextStrategy | None = None,
    evidence_ids: tuple[str, ...] = (),
) -> RecommendationDoc:
    """Split raw markdown into thinking plus the two labeled recommendations."""
    thinking = ""
    body = raw
    m = _THINKING_RE.match(raw)
    if m:
        thinking = m.group(1).strip()
        body = raw[m.end():]
    lines = body.splitlines()
    positions = {}
    for title in (BEST_HEADING, BASELINE_HEADING):
        hits = _heading_lines(lines, title)
        if not hits:
            raise RecommendationParseError(f'missing required heading "## {title}"')
        if len(hits) > 1:
            raise RecommendationParseError(f'duplicated heading "## {title}"')
        positions[title] = hits[0]
    best_at = positions[BEST_HEADING]
    baseline_at = positions[BASELINE_HEADING]
    if baseline_at < best_at:
        raise RecommendationParseError(
            f'heading "## {BEST_HEADING}" must precede "## {BASELINE_HEADING}"'
        )
    best = _parse_section(lines[best_at + 1 : baseline_at])
    baseline = _parse_section(lines[baseline_at + 1 :])
    return RecommendationDoc(
        thinking=thinking,
        best_solution=best,
        strong_baseline=baseline,
        raw_markdown=raw,
        context_strategy=context_strategy,
        evidence_ids=tuple(evidence_ids),
    )


_FIELD_LABELS = (
    ("description", "Description"),
    ("step_by_step", "Step-by-Step Solution"),
    ("coding_details", "Coding Details"),
    ("justification", "Justification"),
    ("references", "References"),
)


def compose_markdown(
    thinking: str, best_solution: RecSection, strong_baseline: RecSection
) -> str:
    """Canonical rendering; parse_recommendation inverts it exactly."""
    parts = []
    if thinking.strip():
        parts.append(f"<small><em>{thinking.strip()}</em></small>\n")
    for title, section in (
        (BEST_HEADING, best_solution),
        (BASELINE_HEADING, strong_baseline),
    ):
        parts.append(f"## {title}\n")
        for attr, label in _FIELD_LABELS:
            value = getattr(section, attr)
            parts.append(f"**{label}**")
            parts.append(f"{value}\n" if value else "")
    return "\n".join(parts).rstrip() + "\n"


_CITATION_RE = re.compile(r"\(([^()]{1,120}?),\s*((?:19|20)\d{2}[a-z]?|Year)\)")
_PLACEHOLDER_RE = re.compile(r"\bAuthor\d*\b")


def _first_surname(authors: str) -> str:
    head = re.split(r"\s*(?:&|\band\b)\s*", authors)[0]
    head = re.sub(r"\bet al\.?", "", head).strip().rstrip(",").strip()
    parts = head.split()
    return parts[-1] if parts else head


def lint_citations(doc: RecommendationDoc) -> list[LintFinding]:
    """Advisory checks: placeholder citations and missing reference entries."""
    findings: list[LintFinding] = []
    for name, section in (
        ("best_solution", doc.best_solution),
        ("strong_baseline", doc.strong_baseline),
    ):
        for authors, year in _CITATION_RE.findall(section.justification):
            citation = f"({authors}, {year})"
            if _PLACEHOLDER_RE.search(authors) or year == "Year":
                findings.append(
                    LintFinding(
                        kind="placeholder",
                        message=f"{name}: placeholder citation {citation}",
                    )
                )
                continue
            surname = _first_surname(authors)
            references = section.references
            if (
                surname.casefold() not in references.casefold()
                or year not in references
            ):
                findings.append(
                    LintFinding(
                        kind="unmatched_citation",
                        message=(
                            f"{name}: citation {citation} has no matching "
                            "reference entry"
                        ),
                    )
                )
    return findings


def save_recommendation(doc: RecommendationDoc, directory: str | Path) -> Path:
    """Persist raw markdown plus a parsed JSON sidecar; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "recommendation.md").write_text(doc.raw_markdown, encoding="utf-8")
    sidecar = {
        "thinking": doc.thinking,
        "sections": {
            "best_solution": asdict(doc.best_solution),
            "strong_baseline": asdict(doc.strong_baseline),
        },
        "evidence_ids": list(doc.evidence_ids),
        "strategy": doc.context_strategy.label if doc.context_strategy else None,
        "created_at": time.time(),
    }
    with open(directory / "recommendation.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, ensure_ascii=False)
    return directory


def _strategy_from_label(label: str | None) -> ContextStrategy | None:
    if label is None:
        return None
    m = re.fullmatch(r"(\w+)\((\w+)\)", label)
    if m:
        return ContextStrategy(m.group(1), mode=m.group(2))
    return ContextStrategy(label)


def load_recommendation(directory: str | Path) -> RecommendationDoc:
    directory = Path(directory)
    raw = (directory / "recommendation.md").read_text(encoding="utf-8")
    with open(directory / "recommendation.json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return RecommendationDoc(
        thinking=sidecar["thinking"],
        best_solution=RecSection(**sidecar["sections"]["best_solution"]),
        strong_baseline=RecSection(**sidecar["sections"]["strong_baseline"]),
        raw_markdown=raw,
        context_strategy=_strategy_from_label(sidecar.get("strategy")),
        evidence_ids=tuple(sidecar.get("evidence_ids", ())),
    )
