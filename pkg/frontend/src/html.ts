/**
 * Small shared helpers for building HTML strings.
 *
 * All render modules return plain HTML strings, so every interpolated value
 * must pass through escapeHtml before it reaches the markup.
 */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Render a pill badge; `kind` selects the color class. */
export function badge(label: string, kind: string): string {
  return `<span class="badge badge-${escapeHtml(kind)}">${escapeHtml(label)}</span>`;
}

/** Badge for a job status (queued/running/succeeded/failed). */
export function statusBadge(status: string): string {
  return badge(status, status);
}

/** Badge describing where an answer value came from. */
export function sourceBadge(source: string): string {
  return badge(source.replaceAll("_", " "), source);
}

/** Inline error paragraph shown under a form control, or nothing. */
export function fieldError(message: string | undefined): string {
  if (!message) return "";
  return `<p class="field-error">${escapeHtml(message)}</p>`;
}
