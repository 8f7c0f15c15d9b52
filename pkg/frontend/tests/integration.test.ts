// End-to-end checks against the real HTTP service. The server is the Python
// package's own CLI entry point; nothing here talks to it except over HTTP.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { Window } from "happy-dom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, isUnreachable } from "../src/api.js";
import { computeGating, tooltipFor } from "../src/gating.js";
import {
  attributeValues,
  buildSegments,
  colorScale,
  regions,
  verifySpans,
} from "../src/highlight.js";
import { pollRun } from "../src/poll.js";
import { renderGraphPanel, renderHighlights, renderPlanRejection } from "../src/render.js";
import type { PlanProblem } from "../src/types.js";

const exec = promisify(execFile);

const FIG1_TEXT = "Sarah savored the soup.";
const EMOJI_TEXT = "x😀y";
const CHAIN = ["tokenizer", "tagger", "gazetteer", "splitter"];

let server: ChildProcess | null = null;
let serverLog = "";
let root = "";
let client: ApiClient;

async function criterion(label: string, body: () => Promise<void>): Promise<void> {
  try {
    await body();
  } catch (err) {
    process.stdout.write(`acceptance FAIL: ${label}\n`);
    throw err;
  }
  process.stdout.write(`acceptance PASS: ${label}\n`);
}

beforeAll(async () => {
  const win = new Window();
  (globalThis as { document?: unknown }).document = win.document;

  root = await mkdtemp(join(tmpdir(), "standoff-ui-"));
  const coll = join(root, "corpus");
  await exec("python3", ["-m", "standoff.cli", "collection", "create", coll, "--name", "corpus"]);

  const port = 21000 + Math.floor(Math.random() * 9000);
  server = spawn(
    "python3",
    ["-m", "standoff.cli", "serve", "--collection", coll, "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk) => (serverLog += chunk));
  server.stderr?.on("data", (chunk) => (serverLog += chunk));

  client = new ApiClient(`http://127.0.0.1:${port}`);
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      await client.listModules();
      break;
    } catch (err) {
      if (Date.now() > deadline) {
        throw new Error(`service never came up: ${String(err)}\n${serverLog}`);
      }
      await new Promise((resolve) => setTimeout(resolve, 150));
    }
  }

  await client.addDocument("corpus", { doc_id: "fig1", text: FIG1_TEXT });
  await client.addDocument("corpus", { doc_id: "emoji", text: EMOJI_TEXT });
});

afterAll(async () => {
  if (server) {
    const gone = new Promise((resolve) => server!.once("exit", resolve));
    server.kill("SIGTERM");
    await Promise.race([gone, new Promise((resolve) => setTimeout(resolve, 5000))]);
    if (server.exitCode === null) server.kill("SIGKILL");
  }
  if (root) await rm(root, { recursive: true, force: true });
});

describe("module graph gating", () => {
  it("enables and disables stages exactly as the server plans them", async () => {
    await criterion("stage buttons mirror server plan verdicts", async () => {
      const names = (await client.listModules()).map((m) => m.name);
      expect(names.slice().sort()).toEqual(["gazetteer", "splitter", "tagger", "tokenizer"]);

      // table-driven: at each step, compare every button to an independent
      // plan call for the same extended sequence
      const steps: string[][] = [[], ["tokenizer"], ["tokenizer", "tagger"], CHAIN];
      for (const selected of steps) {
        const gating = await computeGating(client, selected, names);
        const panel = renderGraphPanel(gating);
        for (const candidate of gating.candidates) {
          const verdict = await client.plan({ stages: [...selected, candidate.module] });
          expect(candidate.enabled).toBe(verdict.ok);
          expect(candidate.problems).toEqual(verdict.problems.map((p) => p.message));
          const button = panel.querySelector(
            `button[data-module="${candidate.module}"]`,
          ) as HTMLButtonElement;
          expect(button).not.toBeNull();
          expect(button.disabled).toBe(!verdict.ok);
        }
      }

      // tagger as an opening stage is refused and says what is missing
      const empty = await computeGating(client, [], names);
      const tagger = empty.candidates.find((c) => c.module === "tagger")!;
      expect(tagger.enabled).toBe(false);
      expect(tooltipFor(tagger)).toBe(
        "stage 0 (tagger): no earlier stage or input provides 'token'",
      );
      const tokenizer = empty.candidates.find((c) => c.module === "tokenizer")!;
      expect(tokenizer.enabled).toBe(true);

      // after tokenizer it becomes available, and the selection can run
      const after = await computeGating(client, ["tokenizer"], names);
      expect(after.candidates.find((c) => c.module === "tagger")!.enabled).toBe(true);
      expect(after.submittable).toBe(true);
      const full = await computeGating(client, CHAIN, names);
      expect(full.submittable).toBe(true);
    });
  });

  it("surfaces a refused run inline with the server's objections", async () => {
    let refusal: ApiError | null = null;
    try {
      await client.startRun({ pipeline: { name: "bad", stages: ["tagger"] } });
    } catch (err) {
      refusal = err as ApiError;
    }
    expect(refusal).toBeInstanceOf(ApiError);
    expect(refusal!.status).toBe(422);
    expect(refusal!.message).toBe("pipeline does not plan");
    const detail = refusal!.detail as { problems: PlanProblem[] };
    const box = renderPlanRejection(refusal!.message, detail.problems);
    expect(box.textContent).toContain(
      "stage 0 (tagger): no earlier stage or input provides 'token'",
    );
  });

  it("flags an unreachable service distinctly from an API error", async () => {
    const dead = new ApiClient("http://127.0.0.1:9");
    try {
      await dead.listModules();
      expect.unreachable("a closed port must not answer");
    } catch (err) {
      expect(isUnreachable(err)).toBe(true);
    }
  });
});

describe("running and viewing", () => {
  it("runs the full chain by polling and reports per-stage results", async () => {
    const ticket = await client.startRun({ pipeline: { name: "vie", stages: CHAIN } });
    expect(["queued", "running"]).toContain(ticket.state);
    const final = await pollRun(client, ticket.run_id, { baseMs: 50, maxMs: 400 });
    expect(final.state).toBe("done");
    expect(final.reports).toHaveLength(2);
    for (const report of final.reports) {
      expect(report.ok).toBe(true);
      expect(report.stages.map((s) => s.module)).toEqual(CHAIN);
    }
    const fig1 = final.reports.find((r) => r.doc_id === "fig1")!;
    expect(fig1.total_added).toBe(7);
    expect(fig1.stages.map((s) => s.added)).toEqual([
      { token: 5 },
      {},
      { name: 1 },
      { sentence: 1 },
    ]);
  });

  it("skips satisfied stages on a rerun without growing the store", async () => {
    const before = (await client.getDocument("fig1")).annotation_count;
    const ticket = await client.startRun({
      pipeline: { name: "vie", stages: CHAIN },
      doc_ids: ["fig1"],
      skip_satisfied: true,
    });
    const final = await pollRun(client, ticket.run_id, { baseMs: 50, maxMs: 400 });
    expect(final.state).toBe("done");
    const statuses = final.reports[0]!.stages.map((s) => s.status);
    expect(statuses).toEqual(["skipped", "skipped", "skipped", "skipped"]);
    expect((await client.getDocument("fig1")).annotation_count).toBe(before);
  });

  it("shows highlights whose on-screen text is exactly the stored text", async () => {
    await criterion("highlighted text matches the server's substring echo", async () => {
      const doc = await client.getDocument("fig1");
      expect(doc.text).toBe(FIG1_TEXT);

      const names = await client.getAnnotations("fig1", { type: "name" });
      expect(names).toHaveLength(1);
      expect(names[0]!.spans).toEqual([[0, 5]]);
      expect(String(names[0]!.attributes["name_type"]?.value)).toBe("person");

      const colors = colorScale(attributeValues(names, "name_type"));
      const segments = buildSegments(doc.text, names, "name_type", colors);
      const marked = regions(segments);
      expect(marked).toHaveLength(1); // exactly one highlighted region
      expect(marked[0]!).toMatchObject({ start: 0, end: 5, label: "person" });

      const container = renderHighlights(segments);
      expect(container.textContent).toBe(doc.text);
      const marks = container.querySelectorAll("mark.hl");
      expect(marks).toHaveLength(1);
      const echo = await client.substring("fig1", 0, 5);
      expect(marks[0]!.textContent).toBe(echo.text);
      expect(echo.text).toBe("Sarah");

      // every span of every annotation agrees with the byte-addressed echo
      const all = await client.getAnnotations("fig1");
      expect(all).toHaveLength(7);
      expect(await verifySpans(client, "fig1", doc.text, all)).toEqual([]);
    });
  });

  it("keeps astral characters intact from bytes to screen", async () => {
    const doc = await client.getDocument("emoji");
    const tokens = await client.getAnnotations("emoji", { type: "token" });
    expect(tokens.map((t) => t.spans)).toEqual([[[0, 1]], [[1, 5]], [[5, 6]]]);
    expect(tokens.map((t) => t.utf16_spans)).toEqual([[[0, 1]], [[1, 3]], [[3, 4]]]);

    const segments = buildSegments(doc.text, tokens);
    const container = renderHighlights(segments);
    expect(container.textContent).toBe(EMOJI_TEXT);
    expect(await verifySpans(client, "emoji", doc.text, tokens)).toEqual([]);

    const echo = await client.substring("emoji", 1, 5);
    expect(echo.text).toBe("😀");
    expect(echo.utf16_start).toBe(1);
    expect(echo.utf16_end).toBe(3);
  });

  it("lists documents through the collection endpoint", async () => {
    const collections = await client.listCollections();
    expect(collections).toHaveLength(1);
    expect(collections[0]!.document_ids).toEqual(["emoji", "fig1"]);
  });
});
