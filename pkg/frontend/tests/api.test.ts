import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, fieldErrorsFrom } from "../src/api";

interface Call {
  url: string;
  method: string;
  body: unknown;
}

function stubFetch(
  handler: (call: Call) => { status: number; body: unknown },
): { calls: Call[]; fetchImpl: (input: string, init?: RequestInit) => Promise<Response> } {
  const calls: Call[] = [];
  const fetchImpl = (input: string, init?: RequestInit): Promise<Response> => {
    const call: Call = {
      url: input,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    calls.push(call);
    const { status, body } = handler(call);
    return Promise.resolve(
      new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
      }),
    );
  };
  return { calls, fetchImpl };
}

describe("ApiClient", () => {
  it("sends JSON bodies and parses JSON responses", async () => {
    const { calls, fetchImpl } = stubFetch(() => ({
      status: 201,
      body: { session_id: "sess-0001", stage: "created" },
    }));
    const client = new ApiClient("http://localhost:8000", fetchImpl);

    const session = await client.createSession();

    expect(session.session_id).toBe("sess-0001");
    expect(calls).toHaveLength(1);
    expect(calls[0]).toMatchObject({
      url: "http://localhost:8000/api/sessions",
      method: "POST",
    });
  });

  it("throws ApiError carrying code and field details on 400", async () => {
    const { fetchImpl } = stubFetch(() => ({
      status: 400,
      body: {
        code: "bad_request",
        message: "invalid answers payload",
        details: [{ field: "intro_goal", message: "value does not match kind 'free_text'" }],
      },
    }));
    const client = new ApiClient("", fetchImpl);

    const error = await client
      .saveAnswers("sess-0001", { answers: { intro_goal: 5 } })
      .then(() => null)
      .catch((e: unknown) => e);

    expect(error).toBeInstanceOf(ApiError);
    const apiError = error as ApiError;
    expect(apiError.status).toBe(400);
    expect(apiError.code).toBe("bad_request");
    expect(apiError.details).toEqual([
      { field: "intro_goal", message: "value does not match kind 'free_text'" },
    ]);
  });

  it("maps 404 bodies to ApiError with empty details", async () => {
    const { fetchImpl } = stubFetch(() => ({
      status: 404,
      body: { code: "not_found", message: "no session 'sess-9999'", details: [] },
    }));
    const client = new ApiClient("", fetchImpl);

    await expect(client.getSession("sess-9999")).rejects.toMatchObject({
      status: 404,
      code: "not_found",
      details: [],
    });
  });

  it("survives non-JSON error bodies", async () => {
    const fetchImpl = () =>
      Promise.resolve(new Response("<html>bad gateway</html>", { status: 502 }));
    const client = new ApiClient("", fetchImpl);

    await expect(client.health()).rejects.toMatchObject({
      status: 502,
      code: "internal",
    });
  });

  it("unwraps the tools listing", async () => {
    const { fetchImpl } = stubFetch(() => ({
      status: 200,
      body: { tools: [{ name: "tabular_baseline", description: "", task_kinds: [], params: [] }] },
    }));
    const client = new ApiClient("", fetchImpl);

    const tools = await client.tools();

    expect(tools).toHaveLength(1);
    expect(tools[0]!.name).toBe("tabular_baseline");
  });

  it("targets the prototype result endpoint", async () => {
    const { calls, fetchImpl } = stubFetch(() => ({
      status: 200,
      body: { tool_name: "text_prompt_direct", metrics: null },
    }));
    const client = new ApiClient("", fetchImpl);

    await client.getPrototypeResult("sess-0001", "job-0002");

    expect(calls[0]!.url).toBe("/api/sessions/sess-0001/jobs/job-0002/result");
  });
});

describe("fieldErrorsFrom", () => {
  it("maps details to a field keyed record", () => {
    const error = new ApiError(400, "bad_request", "invalid answers payload", [
      { field: "intro_goal", message: "required" },
      { field: "eval_metric", message: "unknown option" },
    ]);
    expect(fieldErrorsFrom(error)).toEqual({
      intro_goal: "required",
      eval_metric: "unknown option",
    });
  });

  it("returns an empty record for non-API errors", () => {
    expect(fieldErrorsFrom(new Error("network down"))).toEqual({});
  });
});
