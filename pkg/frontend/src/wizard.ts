/**
 * Questionnaire wizard rendering.
 *
 * The wizard is driven entirely by the schema the service serves, so new
 * sections or questions appear without frontend changes. Each question is
 * rendered from its answer_kind; controls carry `data-question` attributes
 * the event wiring in main.ts listens on.
 */

import { escapeHtml, fieldError, sourceBadge } from "./html";
import type { SessionBuffer } from "./store";
import type { AnswerValue, Question, Schema, Section } from "./types";

export interface WizardState {
  schema: Schema;
  buffer: SessionBuffer;
  activeSection: number;
  fieldErrors: Record<string, string>;
}

/** Section navigation tabs, one per schema section. */
export function renderSectionNav(schema: Schema, activeSection: number): string {
  const tabs = schema.sections
    .map((section, index) => {
      const active = index === activeSection ? " active" : "";
      return (
        `<button class="section-tab${active}" data-section="${index}">` +
        `${escapeHtml(section.name)}</button>`
      );
    })
    .join("");
  return `<nav class="section-nav">${tabs}</nav>`;
}

function asStringList(value: AnswerValue | undefined): string[] {
  if (Array.isArray(value)) return value;
  if (typeof value === "string" && value !== "") return [value];
  return [];
}

function renderControl(question: Question, value: AnswerValue | undefined): string {
  const qid = escapeHtml(question.id);
  switch (question.answer_kind) {
    case "free_text": {
      const text = typeof value === "string" ? value : "";
      return (
        `<textarea data-question="${qid}" data-kind="free_text" rows="3">` +
        `${escapeHtml(text)}</textarea>`
      );
    }
    case "numeric": {
      const num = typeof value === "number" ? String(value) : "";
      return (
        `<input type="number" data-question="${qid}" data-kind="numeric" ` +
        `value="${escapeHtml(num)}">`
      );
    }
    case "boolean": {
      const checked = value === true ? " checked" : "";
      return (
        `<input type="checkbox" data-question="${qid}" data-kind="boolean"${checked}>`
      );
    }
    case "single_choice": {
      const current = typeof value === "string" ? value : "";
      const blank = `<option value=""${current === "" ? " selected" : ""}></option>`;
      const options = question.options
        .map((option) => {
          const selected = option === current ? " selected" : "";
          return `<option value="${escapeHtml(option)}"${selected}>${escapeHtml(option)}</option>`;
        })
        .join("");
      return (
        `<select data-question="${qid}" data-kind="single_choice">${blank}${options}</select>`
      );
    }
    case "multi_choice": {
      const chosen = new Set(asStringList(value));
      const boxes = question.options
        .map((option) => {
          const checked = chosen.has(option) ? " checked" : "";
          return (
            `<label class="choice"><input type="checkbox" data-question="${qid}" ` +
            `data-kind="multi_choice" value="${escapeHtml(option)}"${checked}> ` +
            `${escapeHtml(option)}</label>`
          );
        })
        .join("");
      return `<div class="choice-group">${boxes}</div>`;
    }
  }
}

export function renderQuestion(
  question: Question,
  buffer: SessionBuffer,
  errors: Record<string, string>,
): string {
  const value = buffer.displayValue(question.id);
  const entry = buffer.session.answers[question.id];
  const dirty = buffer.isDirty(question.id)
    ? '<span class="badge badge-dirty">unsaved</span>'
    : "";
  const source = !buffer.isDirty(question.id) && entry ? sourceBadge(entry.source) : "";
  const required = question.required ? '<span class="required">*</span>' : "";
  const help = question.help_text
    ? `<p class="help-text">${escapeHtml(question.help_text)}</p>`
    : "";
  return `<div class="question${errors[question.id] ? " has-error" : ""}" data-question-row="${escapeHtml(question.id)}">
  <label class="question-label">${escapeHtml(question.text)}${required} ${source}${dirty}</label>
  ${help}
  ${renderControl(question, value)}
  ${fieldError(errors[question.id])}
</div>`;
}

function renderSection(
  section: Section,
  buffer: SessionBuffer,
  errors: Record<string, string>,
): string {
  const questions = section.questions
    .map((question) => renderQuestion(question, buffer, errors))
    .join("\n");
  return `<section class="wizard-section">
  <h2>${escapeHtml(section.name)}</h2>
  ${questions}
</section>`;
}

/** The full wizard: description field, section nav, active section, save bar. */
export function renderWizard(state: WizardState): string {
  const { schema, buffer, activeSection, fieldErrors } = state;
  const section = schema.sections[activeSection] ?? schema.sections[0];
  const missing = buffer.session.missing_required;
  const missingNote =
    missing.length > 0
      ? `<p class="missing-note">Required questions still unanswered: ${missing
          .map(escapeHtml)
          .join(", ")}</p>`
      : "";
  const dirtyNote =
    buffer.dirtyCount > 0
      ? `<span class="dirty-count">${buffer.dirtyCount} unsaved change${
          buffer.dirtyCount === 1 ? "" : "s"
        }</span>`
      : "";
  return `<div class="wizard">
<div class="question${fieldErrors["project_description"] ? " has-error" : ""}" data-question-row="project_description">
  <label class="question-label">Project description</label>
  <textarea data-field="project_description" rows="4">${escapeHtml(buffer.description)}</textarea>
  ${fieldError(fieldErrors["project_description"])}
</div>
${renderSectionNav(schema, activeSection)}
${section ? renderSection(section, buffer, fieldErrors) : ""}
${missingNote}
<div class="save-bar">
  <button class="primary" data-action="save-answers">Save answers</button>
  <button data-action="run-smartfill">Smart Fill the rest</button>
  ${dirtyNote}
</div>
</div>`;
}

/** Read a control's current value into the shape save-answers expects. */
export function controlValue(
  kind: Question["answer_kind"],
  element: { value?: string; checked?: boolean },
  checkedValues: string[] = [],
): AnswerValue {
  switch (kind) {
    case "free_text":
    case "single_choice":
      return element.value ?? "";
    case "numeric":
      return Number(element.value ?? "0");
    case "boolean":
      return element.checked === true;
    case "multi_choice":
      return checkedValues;
  }
}
