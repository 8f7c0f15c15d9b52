import type { ApiClient } from "./api.js";
import type { RunInfo } from "./types.js";

// Run progress arrives by polling; there is no push channel. The cadence
// starts at 500 ms and doubles while consecutive snapshots are identical,
// dropping back to the base as soon as anything changes.

export const BASE_POLL_MS = 500;
export const MAX_POLL_MS = 8000;

export interface PollOptions {
  baseMs?: number;
  maxMs?: number;
  onUpdate?: (run: RunInfo) => void;
}

export interface RunFetcher {
  getRun(runId: string): Promise<RunInfo>;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function pollRun(
  client: RunFetcher | ApiClient,
  runId: string,
  options: PollOptions = {},
): Promise<RunInfo> {
  const base = options.baseMs ?? BASE_POLL_MS;
  const max = options.maxMs ?? MAX_POLL_MS;
  let delay = base;
  let previous = "";
  for (;;) {
    const run = await client.getRun(runId);
    options.onUpdate?.(run);
    if (run.state === "done" || run.state === "failed") {
      return run;
    }
    const snapshot = JSON.stringify(run);
    if (snapshot === previous) {
      delay = Math.min(delay * 2, max);
    } else {
      delay = base;
      previous = snapshot;
    }
    await sleep(delay);
  }
}
