/**
 * Prototype tool launcher and run result display.
 *
 * The tool form is generated from the live /api/tools listing, so parameter
 * names, bounds, and defaults always match what the service will accept.
 * Text prompting runs on unlabeled data legitimately produce no metrics; the
 * metrics cell renders "not evaluated" for that case instead of a zero.
 */

import { badge, escapeHtml, statusBadge } from "./html";
import type { JobRecord, ToolInfo, ToolParam, ToolResult } from "./types";

function paramInput(tool: ToolInfo, param: ToolParam): string {
  const name = escapeHtml(param.name);
  const tref = escapeHtml(tool.name);
  if (param.kind === "string") {
    const fallback = param.default === null ? "" : String(param.default);
    return (
      `<input type="text" data-param="${name}" data-tool="${tref}" ` +
      `value="${escapeHtml(fallback)}">`
    );
  }
  const step = param.kind === "int" ? "1" : "any";
  const min = param.minimum === null ? "" : ` min="${escapeHtml(param.minimum)}"`;
  const max = param.maximum === null ? "" : ` max="${escapeHtml(param.maximum)}"`;
  const fallback = param.default === null ? "" : String(param.default);
  return (
    `<input type="number" data-param="${name}" data-tool="${tref}" step="${step}"` +
    `${min}${max} value="${escapeHtml(fallback)}">`
  );
}

function renderParamRow(tool: ToolInfo, param: ToolParam): string {
  const bounds: string[] = [];
  if (param.minimum !== null) bounds.push(`min ${param.minimum}`);
  if (param.maximum !== null) bounds.push(`max ${param.maximum}`);
  const hint = bounds.length > 0 ? ` <span class="param-bounds">(${bounds.join(", ")})</span>` : "";
  const required = param.required ? '<span class="required">*</span>' : "";
  return `<div class="param-row">
  <label>${escapeHtml(param.name)}${required} <span class="param-kind">${escapeHtml(param.kind)}</span>${hint}</label>
  ${paramInput(tool, param)}
</div>`;
}

export function renderToolForm(tools: ToolInfo[], selectedTool: string): string {
  const options = tools
    .map((tool) => {
      const selected = tool.name === selectedTool ? " selected" : "";
      return `<option value="${escapeHtml(tool.name)}"${selected}>${escapeHtml(tool.name)}</option>`;
    })
    .join("");
  const tool = tools.find((t) => t.name === selectedTool) ?? tools[0];
  if (!tool) {
    return `<div class="tool-form"><p>No tools available.</p></div>`;
  }
  const taskOptions = tool.task_kinds
    .map((kind) => `<option value="${escapeHtml(kind)}">${escapeHtml(kind)}</option>`)
    .join("");
  const params = tool.params.map((param) => renderParamRow(tool, param)).join("\n");
  return `<div class="tool-form">
<h2>Run a prototype</h2>
<div class="param-row">
  <label>Tool</label>
  <select data-field="tool_name">${options}</select>
</div>
<p class="tool-description">${escapeHtml(tool.description)}</p>
<div class="param-row">
  <label>Task</label>
  <select data-field="task">${taskOptions}</select>
</div>
<div class="param-row">
  <label>Dataset directory<span class="required">*</span></label>
  <input type="text" data-field="input_uri" placeholder="/path/to/split/dir">
</div>
<div class="param-row">
  <label>Metrics (comma separated)</label>
  <input type="text" data-field="metric_names" placeholder="accuracy, f1">
</div>
${params}
<div class="save-bar">
  <button class="primary" data-action="run-prototype">Run tool</button>
</div>
</div>`;
}

/** Metrics cell contents: formatted values, or "not evaluated" when absent. */
export function metricsCell(metrics: Record<string, number> | null): string {
  if (metrics === null || Object.keys(metrics).length === 0) {
    return `<span class="metrics-none">not evaluated</span>`;
  }
  return Object.entries(metrics)
    .map(
      ([name, value]) =>
        `<span class="metric"><span class="metric-name">${escapeHtml(name)}</span> ${escapeHtml(value.toFixed(4))}</span>`,
    )
    .join(" ");
}

export function renderJobStatus(job: JobRecord): string {
  const error = job.error
    ? `<p class="job-error">${escapeHtml(job.error)}</p>`
    : "";
  const warnings = job.warnings
    .map((warning) => `<li>${escapeHtml(warning)}</li>`)
    .join("");
  const warningList = warnings ? `<ul class="job-warnings">${warnings}</ul>` : "";
  return `<div class="job-status" data-job="${escapeHtml(job.job_id)}">
  <span class="job-id">${escapeHtml(job.job_id)}</span>
  ${badge(job.kind, "kind")}
  ${statusBadge(job.status)}
  ${error}
  ${warningList}
</div>`;
}

export function renderToolResult(result: ToolResult): string {
  const preview = result.predictions.slice(0, 10);
  const rows = preview
    .map(
      (row) =>
        `<tr><td>${escapeHtml(row.unique_id)}</td><td>${escapeHtml(
          JSON.stringify(row.prediction),
        )}</td></tr>`,
    )
    .join("\n");
  const more =
    result.predictions.length > preview.length
      ? `<p class="preview-note">Showing ${preview.length} of ${result.predictions.length} predictions.</p>`
      : "";
  const failure = result.failure_reason
    ? `<p class="job-error">${escapeHtml(result.failure_reason)}</p>`
    : "";
  return `<div class="tool-result">
<div class="result-head">${escapeHtml(result.tool_name)} ${statusBadge(result.status)}</div>
${failure}
<table class="result-table">
  <tr><th>Metrics</th><td class="metrics-cell">${metricsCell(result.metrics)}</td></tr>
  <tr><th>Model artifact</th><td><code>${escapeHtml(result.model_artifact_uri)}</code></td></tr>
  <tr><th>Run log</th><td><code>${escapeHtml(result.log_uri)}</code></td></tr>
</table>
<table class="predictions-table">
  <tr><th>unique_id</th><th>prediction</th></tr>
  ${rows}
</table>
${more}
</div>`;
}
