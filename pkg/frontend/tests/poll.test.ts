import { afterEach, describe, expect, it, vi } from "vitest";

import { BASE_POLL_MS, pollRun } from "../src/poll.js";
import type { RunInfo, RunState } from "../src/types.js";

function snapshot(state: RunState, detail = 0): RunInfo {
  return {
    run_id: "r1",
    pipeline: "p",
    state,
    reports: detail ? [{ pipeline: "p", doc_id: "d", ok: true, total_added: detail, stages: [], error: "" }] : [],
    error: "",
  };
}

/** Hands out the scripted snapshots one per call, repeating the last. */
class ScriptedRuns {
  calls = 0;

  constructor(readonly script: RunInfo[]) {}

  async getRun(_runId: string): Promise<RunInfo> {
    const i = Math.min(this.calls, this.script.length - 1);
    this.calls += 1;
    return this.script[i]!;
  }
}

afterEach(() => {
  vi.useRealTimers();
});

describe("pollRun", () => {
  it("resolves immediately when the first poll is terminal", async () => {
    const client = new ScriptedRuns([snapshot("done")]);
    const result = await pollRun(client, "r1");
    expect(result.state).toBe("done");
    expect(client.calls).toBe(1);
  });

  it("polls at 500 ms and doubles the delay while nothing changes", async () => {
    vi.useFakeTimers();
    const client = new ScriptedRuns([
      snapshot("queued"),
      snapshot("running"),
      snapshot("running"),
      snapshot("running"),
      snapshot("running"),
      snapshot("done"),
    ]);
    const states: RunState[] = [];
    const finished = pollRun(client, "r1", { onUpdate: (run) => states.push(run.state) });

    await vi.advanceTimersByTimeAsync(0);
    expect(client.calls).toBe(1);

    await vi.advanceTimersByTimeAsync(BASE_POLL_MS); // state changed: base cadence
    expect(client.calls).toBe(2);

    await vi.advanceTimersByTimeAsync(BASE_POLL_MS); // unchanged from here on
    expect(client.calls).toBe(3);

    await vi.advanceTimersByTimeAsync(999);
    expect(client.calls).toBe(3); // backed off to 1000
    await vi.advanceTimersByTimeAsync(1);
    expect(client.calls).toBe(4);

    await vi.advanceTimersByTimeAsync(1999);
    expect(client.calls).toBe(4); // backed off to 2000
    await vi.advanceTimersByTimeAsync(1);
    expect(client.calls).toBe(5);

    await vi.advanceTimersByTimeAsync(4000); // 4000 after three repeats
    expect(client.calls).toBe(6);

    const result = await finished;
    expect(result.state).toBe("done");
    expect(states).toEqual(["queued", "running", "running", "running", "running", "done"]);
  });

  it("drops back to the base cadence when the snapshot changes", async () => {
    vi.useFakeTimers();
    const client = new ScriptedRuns([
      snapshot("queued"),
      snapshot("running"),
      snapshot("running"),
      snapshot("running", 3), // progress: a report appeared
      snapshot("done"),
    ]);
    const finished = pollRun(client, "r1");

    await vi.advanceTimersByTimeAsync(0); // poll 1
    await vi.advanceTimersByTimeAsync(500); // poll 2
    await vi.advanceTimersByTimeAsync(500); // poll 3, unchanged, next in 1000
    await vi.advanceTimersByTimeAsync(1000); // poll 4, changed, next in 500
    expect(client.calls).toBe(4);
    await vi.advanceTimersByTimeAsync(499);
    expect(client.calls).toBe(4);
    await vi.advanceTimersByTimeAsync(1); // poll 5: done
    expect(client.calls).toBe(5);
    await expect(finished).resolves.toMatchObject({ state: "done" });
  });

  it("caps the backoff at the configured maximum", async () => {
    vi.useFakeTimers();
    const script = [snapshot("queued")];
    for (let i = 0; i < 6; i++) script.push(snapshot("running"));
    script.push(snapshot("done"));
    const client = new ScriptedRuns(script);
    const finished = pollRun(client, "r1", { baseMs: 100, maxMs: 200 });

    await vi.advanceTimersByTimeAsync(0); // queued
    await vi.advanceTimersByTimeAsync(100); // running (changed)
    // unchanged from here: 200, 200, 200 ... never beyond maxMs
    for (let polls = 3; polls <= 8; polls++) {
      await vi.advanceTimersByTimeAsync(polls === 3 ? 100 : 200);
      expect(client.calls).toBe(polls);
    }
    await expect(finished).resolves.toMatchObject({ state: "done" });
  });
});
