/**
 * Client-side session state.
 *
 * The buffer keeps the last server snapshot plus a staged map of local,
 * unsaved answer values. The invariant is that a question id is staged if
 * and only if its staged value differs from what the server holds, so
 * "dirty" never drifts out of sync with reality: staging a value equal to
 * the server copy unstages it, and applying a fresh server snapshot drops
 * any staged entries the save round-trip confirmed.
 */

import type { AnswerValue, SaveAnswersRequest, SessionView } from "./types";

function sameValue(a: AnswerValue | undefined, b: AnswerValue | undefined): boolean {
  return JSON.stringify(a ?? null) === JSON.stringify(b ?? null);
}

export class SessionBuffer {
  private server: SessionView;
  private staged = new Map<string, AnswerValue>();
  private stagedDescription: string | null = null;

  constructor(snapshot: SessionView) {
    this.server = snapshot;
  }

  get session(): SessionView {
    return this.server;
  }

  /** Replace the server snapshot, keeping only staged values it did not absorb. */
  applyServer(snapshot: SessionView): void {
    this.server = snapshot;
    for (const [questionId, value] of [...this.staged]) {
      if (sameValue(value, this.serverValue(questionId))) {
        this.staged.delete(questionId);
      }
    }
    if (
      this.stagedDescription !== null &&
      this.stagedDescription === snapshot.project_description
    ) {
      this.stagedDescription = null;
    }
  }

  serverValue(questionId: string): AnswerValue | undefined {
    return this.server.answers[questionId]?.value;
  }

  /** The value a form control should show: staged if present, else server. */
  displayValue(questionId: string): AnswerValue | undefined {
    if (this.staged.has(questionId)) return this.staged.get(questionId);
    return this.serverValue(questionId);
  }

  stage(questionId: string, value: AnswerValue): void {
    if (sameValue(value, this.serverValue(questionId))) {
      this.staged.delete(questionId);
    } else {
      this.staged.set(questionId, value);
    }
  }

  stageDescription(text: string): void {
    this.stagedDescription = text === this.server.project_description ? null : text;
  }

  get description(): string {
    return this.stagedDescription ?? this.server.project_description;
  }

  isDirty(questionId: string): boolean {
    return this.staged.has(questionId);
  }

  get dirtyCount(): number {
    return this.staged.size + (this.stagedDescription === null ? 0 : 1);
  }

  /** Build the save payload for everything staged locally. */
  buildSavePayload(): SaveAnswersRequest {
    const payload: SaveAnswersRequest = {};
    if (this.staged.size > 0) {
      payload.answers = Object.fromEntries(this.staged);
    }
    if (this.stagedDescription !== null) {
      payload.project_description = this.stagedDescription;
    }
    return payload;
  }

  /** Drop one staged value, reverting the control to the server copy. */
  revert(questionId: string): void {
    this.staged.delete(questionId);
  }
}
