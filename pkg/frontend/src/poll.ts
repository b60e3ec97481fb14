/**
 * Job polling: repeatedly fetch a job record until it reaches a terminal
 * status. The sleep function is injectable so tests can run without delays.
 */

import type { ApiClient } from "./api";
import type { JobRecord } from "./types";

const TERMINAL = new Set(["succeeded", "failed"]);

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (job: JobRecord) => void;
}

/** Resolve with the terminal job record, or reject after timeoutMs. */
export async function pollJob(
  client: ApiClient,
  sessionId: string,
  jobId: string,
  options: PollOptions = {},
): Promise<JobRecord> {
  const intervalMs = options.intervalMs ?? 250;
  const timeoutMs = options.timeoutMs ?? 120_000;
  const sleep = options.sleep ?? defaultSleep;
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const job = await client.getJob(sessionId, jobId);
    options.onUpdate?.(job);
    if (TERMINAL.has(job.status)) {
      return job;
    }
    if (Date.now() >= deadline) {
      throw new Error(`job ${jobId} did not finish within ${timeoutMs}ms`);
    }
    await sleep(intervalMs);
  }
}
