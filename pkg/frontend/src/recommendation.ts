/**
 * Recommendation display: two solution tabs plus an evidence list.
 *
 * The model's thinking stream is rendered inside a <details> element with no
 * `open` attribute, so it stays collapsed until the reader asks for it.
 */

import { badge, escapeHtml } from "./html";
import type { RecSectionView, RecommendationView } from "./types";

export type RecTab = "best_solution" | "strong_baseline" | "evidence";

const TAB_LABELS: Record<RecTab, string> = {
  best_solution: "Best solution",
  strong_baseline: "Strong baseline",
  evidence: "Evidence",
};

const FIELD_LABELS: [keyof RecSectionView, string][] = [
  ["description", "Description"],
  ["step_by_step", "Step by step"],
  ["coding_details", "Coding details"],
  ["justification", "Justification"],
  ["references", "References"],
];

function renderSolution(section: RecSectionView): string {
  const blocks = FIELD_LABELS.map(
    ([field, label]) =>
      `<div class="rec-field"><h3>${label}</h3><p>${escapeHtml(section[field])}</p></div>`,
  ).join("\n");
  return `<div class="rec-solution">${blocks}</div>`;
}

function renderEvidence(view: RecommendationView): string {
  if (view.evidence_ids.length === 0) {
    return `<p>No shortlisted papers backed this recommendation.</p>`;
  }
  const items = view.evidence_ids
    .map(
      (id) =>
        `<li><a href="https://arxiv.org/abs/${escapeHtml(id)}" target="_blank" rel="noopener">arXiv:${escapeHtml(id)}</a></li>`,
    )
    .join("\n");
  return `<ul class="evidence-list">${items}</ul>`;
}

function renderLint(view: RecommendationView): string {
  if (view.lint.length === 0) return "";
  const items = view.lint
    .map(
      (finding) =>
        `<li>${badge(finding.kind, "lint")} ${escapeHtml(finding.message)}</li>`,
    )
    .join("\n");
  return `<div class="lint-findings"><h3>Review notes</h3><ul>${items}</ul></div>`;
}

export function renderRecommendation(view: RecommendationView, activeTab: RecTab): string {
  const tabs = (Object.keys(TAB_LABELS) as RecTab[])
    .map((tab) => {
      const active = tab === activeTab ? " active" : "";
      return `<button class="rec-tab${active}" data-rec-tab="${tab}">${TAB_LABELS[tab]}</button>`;
    })
    .join("");
  let body: string;
  if (activeTab === "evidence") {
    body = renderEvidence(view);
  } else {
    body = renderSolution(view.sections[activeTab]);
  }
  const thinking = view.thinking
    ? `<details class="thinking"><summary>Model thinking</summary><pre>${escapeHtml(view.thinking)}</pre></details>`
    : "";
  return `<div class="recommendation">
<div class="rec-meta">${badge(view.strategy, "strategy")} <span class="rec-evidence-count">${view.evidence_ids.length} evidence paper${view.evidence_ids.length === 1 ? "" : "s"}</span></div>
${thinking}
<nav class="rec-tabs">${tabs}</nav>
<div class="rec-body">${body}</div>
${renderLint(view)}
</div>`;
}
