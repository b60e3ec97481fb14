/**
 * Feedback form: star ratings per aspect plus a free-text comment.
 */

import { escapeHtml } from "./html";

export const FEEDBACK_ASPECTS = ["relevance", "clarity", "actionability"] as const;

export function renderFeedbackForm(feedbackCount: number): string {
  const rows = FEEDBACK_ASPECTS.map((aspect) => {
    const stars = [1, 2, 3, 4, 5]
      .map(
        (value) =>
          `<label class="star"><input type="radio" name="rating-${aspect}" ` +
          `data-aspect="${aspect}" value="${value}"> ${value}</label>`,
      )
      .join("");
    return `<div class="param-row">
  <label>${escapeHtml(aspect)}</label>
  <div class="stars">${stars}</div>
</div>`;
  }).join("\n");
  const prior =
    feedbackCount > 0
      ? `<p class="help-text">${feedbackCount} feedback entr${feedbackCount === 1 ? "y" : "ies"} recorded so far.</p>`
      : "";
  return `<div class="feedback-form">
<h2>Feedback</h2>
${prior}
${rows}
<div class="param-row">
  <label>Comments</label>
  <textarea data-field="feedback_text" rows="3"></textarea>
</div>
<div class="save-bar">
  <button class="primary" data-action="submit-feedback">Submit feedback</button>
</div>
</div>`;
}
