/**
 * Typed client for the consult-service HTTP API.
 *
 * Every non-2xx response carries the uniform `{code, message, details}` body,
 * which is surfaced as an ApiError so callers can route field-level details
 * to inline form errors.
 */

import type {
  ErrorBody,
  FieldError,
  JobRecord,
  JobSubmission,
  PrototypeRequest,
  RecommendationRequest,
  RecommendationView,
  SaveAnswersRequest,
  Schema,
  SessionView,
  ToolInfo,
  ToolResult,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: FieldError[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/**
 * Map an error to `{field: message}` for inline display.
 * Non-API errors map to an empty object (callers show a general banner).
 */
export function fieldErrorsFrom(error: unknown): Record<string, string> {
  if (!(error instanceof ApiError)) return {};
  const mapped: Record<string, string> = {};
  for (const detail of error.details) {
    mapped[detail.field] = detail.message;
  }
  return mapped;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let parsed: Partial<ErrorBody> = {};
      try {
        parsed = (await response.json()) as ErrorBody;
      } catch {
        // non-JSON error body; fall through to the generic message
      }
      throw new ApiError(
        response.status,
        parsed.code ?? "internal",
        parsed.message ?? `request failed with status ${response.status}`,
        parsed.details ?? [],
      );
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  schema(): Promise<Schema> {
    return this.request("GET", "/api/schema");
  }

  async tools(): Promise<ToolInfo[]> {
    const body = await this.request<{ tools: ToolInfo[] }>("GET", "/api/tools");
    return body.tools;
  }

  createSession(): Promise<SessionView> {
    return this.request("POST", "/api/sessions");
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  saveAnswers(sessionId: string, payload: SaveAnswersRequest): Promise<SessionView> {
    return this.request("PUT", `/api/sessions/${sessionId}/answers`, payload);
  }

  runSmartFill(sessionId: string): Promise<JobSubmission> {
    return this.request("POST", `/api/sessions/${sessionId}/smartfill`, {});
  }

  runRecommendation(
    sessionId: string,
    payload: RecommendationRequest = {},
  ): Promise<JobSubmission> {
    return this.request("POST", `/api/sessions/${sessionId}/recommendation`, payload);
  }

  getRecommendation(sessionId: string): Promise<RecommendationView> {
    return this.request("GET", `/api/sessions/${sessionId}/recommendation`);
  }

  runPrototype(sessionId: string, payload: PrototypeRequest): Promise<JobSubmission> {
    return this.request("POST", `/api/sessions/${sessionId}/prototype`, payload);
  }

  getJob(sessionId: string, jobId: string): Promise<JobRecord> {
    return this.request("GET", `/api/sessions/${sessionId}/jobs/${jobId}`);
  }

  getPrototypeResult(sessionId: string, jobId: string): Promise<ToolResult> {
    return this.request("GET", `/api/sessions/${sessionId}/jobs/${jobId}/result`);
  }

  submitFeedback(
    sessionId: string,
    ratings: Record<string, number>,
    text: string,
  ): Promise<{ status: string; count: number }> {
    return this.request("POST", `/api/sessions/${sessionId}/feedback`, { ratings, text });
  }
}
