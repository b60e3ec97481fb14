/**
 * Smart Fill suggestion review.
 *
 * Each suggestion renders as a card with a provenance badge, the catalog
 * entries it leaned on, and the model's rationale. The reviewer accepts,
 * edits, or rejects each card; buildAnswersPayload turns those decisions
 * into the accepted_suggestions/edits save payload. Rejected suggestions
 * are simply never sent, so the server keeps no trace of them.
 */

import { badge, escapeHtml } from "./html";
import type { AnswerValue, SaveAnswersRequest, Suggestion, SuggestionSet } from "./types";

export type DecisionKind = "pending" | "accepted" | "edited" | "rejected";

export interface Decision {
  kind: DecisionKind;
  editedValue?: AnswerValue;
}

export type DecisionMap = Record<string, Decision>;

function valueText(value: AnswerValue): string {
  if (Array.isArray(value)) return value.join(", ");
  return String(value);
}

function provenanceBadge(provenance: string): string {
  return badge(provenance.replaceAll("_", " "), provenance);
}

export function renderSuggestionCard(suggestion: Suggestion, decision: Decision): string {
  const qid = escapeHtml(suggestion.question_id);
  const chips = suggestion.catalog_entries
    .map((entry) => `<span class="chip">${escapeHtml(entry)}</span>`)
    .join(" ");
  const catalogRow = chips ? `<div class="catalog-entries">Grounded in: ${chips}</div>` : "";
  const decided = decision.kind !== "pending" ? ` decided-${decision.kind}` : "";
  const editValue =
    decision.kind === "edited" && decision.editedValue !== undefined
      ? decision.editedValue
      : suggestion.proposed_value;
  return `<div class="suggestion-card${decided}" data-suggestion="${qid}">
  <div class="suggestion-head">
    <span class="suggestion-qid">${qid}</span>
    ${provenanceBadge(suggestion.provenance)}
    ${decision.kind !== "pending" ? badge(decision.kind, decision.kind) : ""}
  </div>
  <div class="suggestion-value">
    <input type="text" data-edit-for="${qid}" value="${escapeHtml(valueText(editValue))}">
  </div>
  ${catalogRow}
  <p class="rationale">${escapeHtml(suggestion.rationale)}</p>
  <div class="suggestion-actions">
    <button data-decide="accepted" data-suggestion-id="${qid}">Accept</button>
    <button data-decide="edited" data-suggestion-id="${qid}">Accept with edit</button>
    <button data-decide="rejected" data-suggestion-id="${qid}">Reject</button>
  </div>
</div>`;
}

export function renderSuggestionReview(set: SuggestionSet, decisions: DecisionMap): string {
  if (set.suggestions.length === 0) {
    return `<div class="smartfill-review"><p>Smart Fill found nothing left to suggest.</p></div>`;
  }
  const partialNote = set.partial
    ? `<p class="warning">This suggestion set is partial; some questions could not be filled.</p>`
    : "";
  const cards = set.suggestions
    .map((suggestion) =>
      renderSuggestionCard(suggestion, decisions[suggestion.question_id] ?? { kind: "pending" }),
    )
    .join("\n");
  const undecided = set.suggestions.filter(
    (s) => (decisions[s.question_id]?.kind ?? "pending") === "pending",
  ).length;
  const applyLabel = undecided > 0 ? `Apply decisions (${undecided} pending)` : "Apply decisions";
  return `<div class="smartfill-review">
<h2>Smart Fill suggestions</h2>
${partialNote}
${cards}
<div class="save-bar">
  <button class="primary" data-action="apply-suggestions">${escapeHtml(applyLabel)}</button>
</div>
</div>`;
}

/**
 * Turn review decisions into a save payload. Accepted suggestions are named
 * in accepted_suggestions; edited ones also carry the replacement value in
 * edits. Pending and rejected suggestions are omitted entirely.
 */
export function buildAnswersPayload(
  set: SuggestionSet,
  decisions: DecisionMap,
): SaveAnswersRequest {
  const accepted: string[] = [];
  const edits: Record<string, AnswerValue> = {};
  for (const suggestion of set.suggestions) {
    const decision = decisions[suggestion.question_id];
    if (!decision) continue;
    if (decision.kind === "accepted") {
      accepted.push(suggestion.question_id);
    } else if (decision.kind === "edited") {
      accepted.push(suggestion.question_id);
      edits[suggestion.question_id] = decision.editedValue ?? suggestion.proposed_value;
    }
  }
  const payload: SaveAnswersRequest = { accepted_suggestions: accepted };
  if (Object.keys(edits).length > 0) {
    payload.edits = edits;
  }
  return payload;
}
