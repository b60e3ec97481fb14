/**
 * Browser entry point: session bootstrap, hash routing, event wiring.
 *
 * All rendering lives in the pure modules (wizard, smartfill, recommendation,
 * prototype, feedback); this file only moves data between the API client, the
 * session buffer, and the DOM.
 */

import { ApiClient, ApiError, fieldErrorsFrom } from "./api";
import { renderFeedbackForm } from "./feedback";
import { escapeHtml } from "./html";
import { pollJob } from "./poll";
import {
  metricsCell,
  renderJobStatus,
  renderToolForm,
  renderToolResult,
} from "./prototype";
import { renderRecommendation, type RecTab } from "./recommendation";
import {
  buildAnswersPayload,
  renderSuggestionReview,
  type DecisionKind,
  type DecisionMap,
} from "./smartfill";
import { SessionBuffer } from "./store";
import { controlValue, renderWizard } from "./wizard";
import type { AnswerValue, Question, Schema, ToolInfo } from "./types";

const SESSION_KEY = "sciconsult_session_id";
const ROUTES = ["wizard", "smartfill", "recommendation", "prototype", "feedback"] as const;
type Route = (typeof ROUTES)[number];

interface AppState {
  client: ApiClient;
  schema: Schema;
  tools: ToolInfo[];
  buffer: SessionBuffer;
  route: Route;
  activeSection: number;
  fieldErrors: Record<string, string>;
  decisions: DecisionMap;
  recTab: RecTab;
  selectedTool: string;
  banner: string;
  busy: boolean;
}

function questionMap(schema: Schema): Map<string, Question> {
  const map = new Map<string, Question>();
  for (const section of schema.sections) {
    for (const question of section.questions) {
      map.set(question.id, question);
    }
  }
  return map;
}

function currentRoute(): Route {
  const hash = window.location.hash.replace(/^#\/?/, "");
  return (ROUTES as readonly string[]).includes(hash) ? (hash as Route) : "wizard";
}

function renderNav(route: Route, stage: string): string {
  const links = ROUTES.map((name) => {
    const active = name === route ? " active" : "";
    return `<a class="nav-link${active}" href="#${name}">${name}</a>`;
  }).join("");
  return `<header class="topbar">
  <h1>SciConsult</h1>
  <nav>${links}</nav>
  <span class="stage-pill">stage: ${escapeHtml(stage)}</span>
</header>`;
}

async function renderRoute(state: AppState): Promise<string> {
  const session = state.buffer.session;
  switch (state.route) {
    case "wizard":
      return renderWizard({
        schema: state.schema,
        buffer: state.buffer,
        activeSection: state.activeSection,
        fieldErrors: state.fieldErrors,
      });
    case "smartfill": {
      const set = session.suggestions;
      if (!set) {
        return `<div class="smartfill-review"><p>No Smart Fill suggestions yet. Run Smart Fill from the wizard first.</p></div>`;
      }
      return renderSuggestionReview(set, state.decisions);
    }
    case "recommendation": {
      if (!session.recommendation) {
        return `<div class="recommendation"><p>No recommendation yet.</p>
<div class="save-bar"><button class="primary" data-action="run-recommendation">Generate recommendation</button></div></div>`;
      }
      const view = await state.client.getRecommendation(session.session_id);
      return renderRecommendation(view, state.recTab);
    }
    case "prototype": {
      const jobs = session.jobs
        .filter((job) => job.kind === "prototype")
        .map(renderJobStatus)
        .join("\n");
      const results = await Promise.all(
        session.jobs
          .filter((job) => job.kind === "prototype" && job.status === "succeeded")
          .map(async (job) => {
            const result = await state.client.getPrototypeResult(
              session.session_id,
              job.job_id,
            );
            return renderToolResult(result);
          }),
      );
      return `${renderToolForm(state.tools, state.selectedTool)}
<div class="job-list">${jobs}</div>
${results.join("\n")}`;
    }
    case "feedback":
      return renderFeedbackForm(session.feedback_count);
  }
}

async function render(state: AppState, root: HTMLElement): Promise<void> {
  const banner = state.banner
    ? `<div class="banner">${escapeHtml(state.banner)}</div>`
    : "";
  const busy = state.busy ? `<div class="busy">Working…</div>` : "";
  root.innerHTML = `${renderNav(state.route, state.buffer.session.stage)}
${banner}${busy}
<main>${await renderRoute(state)}</main>`;
}

async function refreshSession(state: AppState): Promise<void> {
  const snapshot = await state.client.getSession(state.buffer.session.session_id);
  state.buffer.applyServer(snapshot);
}

function reportError(state: AppState, error: unknown): void {
  if (error instanceof ApiError) {
    state.fieldErrors = fieldErrorsFrom(error);
    state.banner = `${error.code}: ${error.message}`;
  } else {
    state.banner = String(error);
  }
}

async function runJob(
  state: AppState,
  root: HTMLElement,
  submit: () => Promise<{ job_id: string }>,
): Promise<void> {
  state.busy = true;
  state.banner = "";
  await render(state, root);
  try {
    const submission = await submit();
    const job = await pollJob(state.client, state.buffer.session.session_id, submission.job_id);
    if (job.status === "failed") {
      state.banner = `job failed: ${job.error ?? "unknown error"}`;
    }
    await refreshSession(state);
  } catch (error) {
    reportError(state, error);
  } finally {
    state.busy = false;
    await render(state, root);
  }
}

function readWizardInputs(state: AppState, root: HTMLElement): void {
  const questions = questionMap(state.schema);
  const touched = new Set<string>();
  for (const element of root.querySelectorAll<HTMLElement>("[data-question]")) {
    const qid = element.dataset.question ?? "";
    const question = questions.get(qid);
    if (!question || touched.has(qid)) continue;
    touched.add(qid);
    if (question.answer_kind === "multi_choice") {
      const checked = [
        ...root.querySelectorAll<HTMLInputElement>(
          `input[data-question="${qid}"]:checked`,
        ),
      ].map((box) => box.value);
      state.buffer.stage(qid, checked);
    } else {
      const control = element as HTMLInputElement;
      if (question.answer_kind === "numeric" && control.value === "") {
        state.buffer.revert(qid);
        continue;
      }
      state.buffer.stage(qid, controlValue(question.answer_kind, control));
    }
  }
  const description = root.querySelector<HTMLTextAreaElement>(
    '[data-field="project_description"]',
  );
  if (description) {
    state.buffer.stageDescription(description.value);
  }
}

async function saveAnswers(state: AppState, root: HTMLElement): Promise<void> {
  readWizardInputs(state, root);
  const payload = state.buffer.buildSavePayload();
  if (Object.keys(payload).length === 0) {
    state.banner = "Nothing to save.";
    await render(state, root);
    return;
  }
  try {
    const snapshot = await state.client.saveAnswers(state.buffer.session.session_id, payload);
    state.buffer.applyServer(snapshot);
    state.fieldErrors = {};
    state.banner = "Answers saved.";
  } catch (error) {
    reportError(state, error);
  }
  await render(state, root);
}

function coerceEdit(state: AppState, qid: string, raw: string): AnswerValue {
  const question = questionMap(state.schema).get(qid);
  switch (question?.answer_kind) {
    case "numeric":
      return Number(raw);
    case "boolean":
      return raw.trim().toLowerCase() === "true";
    case "multi_choice":
      return raw
        .split(",")
        .map((part) => part.trim())
        .filter((part) => part !== "");
    default:
      return raw;
  }
}

async function applySuggestions(state: AppState, root: HTMLElement): Promise<void> {
  const set = state.buffer.session.suggestions;
  if (!set) return;
  for (const input of root.querySelectorAll<HTMLInputElement>("[data-edit-for]")) {
    const qid = input.dataset.editFor ?? "";
    const decision = state.decisions[qid];
    if (decision?.kind === "edited") {
      decision.editedValue = coerceEdit(state, qid, input.value);
    }
  }
  const payload = buildAnswersPayload(set, state.decisions);
  try {
    const snapshot = await state.client.saveAnswers(state.buffer.session.session_id, payload);
    state.buffer.applyServer(snapshot);
    state.banner = "Suggestions applied.";
    state.route = "wizard";
    window.location.hash = "#wizard";
  } catch (error) {
    reportError(state, error);
  }
  await render(state, root);
}

async function runPrototype(state: AppState, root: HTMLElement): Promise<void> {
  const field = (name: string) =>
    root.querySelector<HTMLInputElement | HTMLSelectElement>(`[data-field="${name}"]`);
  const toolName = field("tool_name")?.value ?? "";
  const tool = state.tools.find((t) => t.name === toolName);
  const hyperparameters: Record<string, unknown> = {};
  for (const input of root.querySelectorAll<HTMLInputElement>(
    `[data-param][data-tool="${toolName}"]`,
  )) {
    if (input.value === "") continue;
    const spec = tool?.params.find((p) => p.name === input.dataset.param);
    hyperparameters[input.dataset.param ?? ""] =
      spec && spec.kind !== "string" ? Number(input.value) : input.value;
  }
  const metricNames = (field("metric_names")?.value ?? "")
    .split(",")
    .map((name) => name.trim())
    .filter((name) => name !== "");
  await runJob(state, root, () =>
    state.client.runPrototype(state.buffer.session.session_id, {
      tool_name: toolName,
      task: field("task")?.value ?? "",
      input_uri: field("input_uri")?.value ?? "",
      hyperparameters,
      metric_names: metricNames,
    }),
  );
}

async function submitFeedback(state: AppState, root: HTMLElement): Promise<void> {
  const ratings: Record<string, number> = {};
  for (const input of root.querySelectorAll<HTMLInputElement>("[data-aspect]:checked")) {
    ratings[input.dataset.aspect ?? ""] = Number(input.value);
  }
  const text =
    root.querySelector<HTMLTextAreaElement>('[data-field="feedback_text"]')?.value ?? "";
  try {
    await state.client.submitFeedback(state.buffer.session.session_id, ratings, text);
    await refreshSession(state);
    state.banner = "Feedback recorded.";
  } catch (error) {
    reportError(state, error);
  }
  await render(state, root);
}

async function handleClick(state: AppState, root: HTMLElement, target: HTMLElement) {
  const sectionTab = target.closest<HTMLElement>("[data-section]");
  if (sectionTab) {
    readWizardInputs(state, root);
    state.activeSection = Number(sectionTab.dataset.section);
    await render(state, root);
    return;
  }
  const recTab = target.closest<HTMLElement>("[data-rec-tab]");
  if (recTab) {
    state.recTab = recTab.dataset.recTab as RecTab;
    await render(state, root);
    return;
  }
  const decide = target.closest<HTMLElement>("[data-decide]");
  if (decide) {
    const qid = decide.dataset.suggestionId ?? "";
    const kind = decide.dataset.decide as DecisionKind;
    const edit = root.querySelector<HTMLInputElement>(`[data-edit-for="${qid}"]`);
    state.decisions[qid] = { kind };
    if (kind === "edited" && edit) {
      state.decisions[qid].editedValue = coerceEdit(state, qid, edit.value);
    }
    await render(state, root);
    return;
  }
  const action = target.closest<HTMLElement>("[data-action]")?.dataset.action;
  if (!action) return;
  switch (action) {
    case "save-answers":
      await saveAnswers(state, root);
      break;
    case "run-smartfill":
      readWizardInputs(state, root);
      if (state.buffer.dirtyCount > 0) {
        await saveAnswers(state, root);
      }
      await runJob(state, root, () =>
        state.client.runSmartFill(state.buffer.session.session_id),
      );
      state.decisions = {};
      state.route = "smartfill";
      window.location.hash = "#smartfill";
      await render(state, root);
      break;
    case "run-recommendation":
      await runJob(state, root, () =>
        state.client.runRecommendation(state.buffer.session.session_id),
      );
      await render(state, root);
      break;
    case "apply-suggestions":
      await applySuggestions(state, root);
      break;
    case "run-prototype":
      await runPrototype(state, root);
      break;
    case "submit-feedback":
      await submitFeedback(state, root);
      break;
  }
}

async function loadOrCreateSession(client: ApiClient): Promise<SessionBuffer> {
  const stored = window.localStorage.getItem(SESSION_KEY);
  if (stored) {
    try {
      return new SessionBuffer(await client.getSession(stored));
    } catch {
      window.localStorage.removeItem(SESSION_KEY);
    }
  }
  const created = await client.createSession();
  window.localStorage.setItem(SESSION_KEY, created.session_id);
  return new SessionBuffer(created);
}

export async function start(root: HTMLElement): Promise<void> {
  const client = new ApiClient();
  const [schema, tools, buffer] = await Promise.all([
    client.schema(),
    client.tools(),
    loadOrCreateSession(client),
  ]);
  const state: AppState = {
    client,
    schema,
    tools,
    buffer,
    route: currentRoute(),
    activeSection: 0,
    fieldErrors: {},
    decisions: {},
    recTab: "best_solution",
    selectedTool: tools[0]?.name ?? "",
    banner: "",
    busy: false,
  };
  window.addEventListener("hashchange", () => {
    state.route = currentRoute();
    state.banner = "";
    void refreshSession(state).then(() => render(state, root));
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    if (target) void handleClick(state, root, target);
  });
  root.addEventListener("change", (event) => {
    const target = event.target as HTMLSelectElement | null;
    if (target?.dataset.field === "tool_name") {
      state.selectedTool = target.value;
      void render(state, root);
    }
  });
  await render(state, root);
}

const rootElement = document.getElementById("app");
if (rootElement) {
  void start(rootElement).catch((error) => {
    rootElement.innerHTML = `<div class="banner">Failed to reach the consult service: ${escapeHtml(
      String(error),
    )}</div>`;
  });
}

export { metricsCell };
