import { ApiClient, ApiError, isUnreachable } from "./api.js";
import { computeGating } from "./gating.js";
import type { GatingState } from "./gating.js";
import { attributeValues, buildSegments, colorScale } from "./highlight.js";
import { pollRun } from "./poll.js";
import { annotationRows, renderWindow } from "./table.js";
import {
  el,
  renderAnnotationTable,
  renderBanner,
  renderEmptyState,
  renderGraphPanel,
  renderHighlights,
  renderLegend,
  renderPlanRejection,
  renderRunPanel,
} from "./render.js";
import type { AnnotationRecord, DocumentInfo, PlanProblem } from "./types.js";

// Single-page wiring. All validity decisions (which stage may come next,
// whether the selection can run) are the server's; this file only renders
// what it is told and forwards clicks.

const client = new ApiClient("");

interface AppState {
  moduleNames: string[];
  selectedStages: string[];
  gating: GatingState | null;
  collection: string;
  docIds: string[];
  currentDoc: DocumentInfo | null;
  currentType: string;
  page: number;
  skipSatisfied: boolean;
}

const state: AppState = {
  moduleNames: [],
  selectedStages: [],
  gating: null,
  collection: "",
  docIds: [],
  currentDoc: null,
  currentType: "",
  page: 0,
  skipSatisfied: false,
};

function slot(id: string): HTMLElement {
  let node = document.getElementById(id);
  if (!node) {
    node = el("section", { id });
    document.getElementById("app")!.append(node);
  }
  return node;
}

function swap(id: string, content: HTMLElement): void {
  const holder = slot(id);
  holder.replaceChildren(content);
}

async function refreshGraph(): Promise<void> {
  state.gating = await computeGating(client, state.selectedStages, state.moduleNames);
  const panel = renderGraphPanel(state.gating, {
    onPick: (module) => {
      state.selectedStages.push(module);
      void guard(refreshGraph);
    },
    onClear: () => {
      state.selectedStages = [];
      void guard(refreshGraph);
    },
    onSubmit: () => void guard(submitRun),
  });
  const skip = el("label", { class: "skip-toggle" });
  const box = el("input", { type: "checkbox" }) as HTMLInputElement;
  box.checked = state.skipSatisfied;
  box.addEventListener("change", () => {
    state.skipSatisfied = box.checked;
  });
  skip.append(box, " skip stages whose outputs already exist");
  panel.append(skip);
  swap("graph", panel);
}

async function submitRun(): Promise<void> {
  const pipeline = { name: "built-in-browser", stages: [...state.selectedStages] };
  let ticket;
  try {
    ticket = await client.startRun({ pipeline, skip_satisfied: state.skipSatisfied });
  } catch (err) {
    if (err instanceof ApiError) {
      const detail = err.detail as { problems?: PlanProblem[] } | null;
      swap("run", renderPlanRejection(err.message, detail?.problems ?? []));
      return;
    }
    throw err;
  }
  const final = await pollRun(client, ticket.run_id, {
    onUpdate: (run) => swap("run", renderRunPanel(run)),
  });
  swap("run", renderRunPanel(final));
  if (state.currentDoc) await openDocument(state.currentDoc.doc_id);
}

function docPicker(): HTMLElement {
  const picker = el("div", { class: "doc-picker" });
  const select = el("select", { class: "doc-select" }) as HTMLSelectElement;
  select.append(el("option", { value: "" }, "choose a document"));
  for (const docId of state.docIds) {
    select.append(el("option", { value: docId }, docId));
  }
  if (state.currentDoc) select.value = state.currentDoc.doc_id;
  select.addEventListener("change", () => {
    if (select.value) void guard(() => openDocument(select.value));
  });
  picker.append(select);
  return picker;
}

function typePicker(doc: DocumentInfo): HTMLElement {
  const select = el("select", { class: "type-select" }) as HTMLSelectElement;
  select.append(el("option", { value: "" }, "all types"));
  for (const annType of Object.keys(doc.annotation_types).sort()) {
    select.append(el("option", { value: annType }, annType));
  }
  select.value = state.currentType;
  select.addEventListener("change", () => {
    state.currentType = select.value;
    void guard(() => openDocument(doc.doc_id));
  });
  return select;
}

function labelAttribute(records: AnnotationRecord[]): string {
  for (const record of records) {
    const names = Object.keys(record.attributes);
    if (names.length > 0) return names[0]!;
  }
  return "";
}

async function openDocument(docId: string): Promise<void> {
  const doc = await client.getDocument(docId);
  if (state.currentDoc?.doc_id !== docId) state.page = 0;
  state.currentDoc = doc;

  const view = el("div", { class: "doc-view" });
  view.append(docPicker(), typePicker(doc));

  const win = renderWindow(doc.length, state.page);
  const query: { type?: string; start?: number; end?: number } = {};
  if (state.currentType) query.type = state.currentType;
  if (win.windowed) {
    query.start = win.start;
    query.end = win.end;
  }
  const records = await client.getAnnotations(docId, query);

  if (win.windowed) {
    const pager = el("div", { class: "pager" },
      `showing bytes ${win.start}..${win.end} of ${doc.length}`);
    const prev = el("button", {}, "prev") as HTMLButtonElement;
    prev.disabled = state.page === 0;
    prev.addEventListener("click", () => {
      state.page -= 1;
      void guard(() => openDocument(docId));
    });
    const next = el("button", {}, "next") as HTMLButtonElement;
    next.disabled = state.page >= win.pages - 1;
    next.addEventListener("click", () => {
      state.page += 1;
      void guard(() => openDocument(docId));
    });
    pager.append(prev, next);
    view.append(pager);
  }

  const attr = labelAttribute(records);
  const colors = colorScale(attributeValues(records, attr));
  // windowed text: the server says where the byte window falls in code units
  let text = doc.text;
  let shifted = records;
  if (win.windowed) {
    const echo = await client.substring(docId, win.start, win.end);
    text = echo.text;
    shifted = shiftIntoWindow(records, echo.utf16_start, text.length);
  }
  const segments = buildSegments(text, shifted, attr, colors);

  const detail = el("pre", { class: "record-detail" }, "click a mark or row for details");
  const reveal = (ids: number[]) => {
    const chosen = records.filter((record) => ids.includes(record.id));
    detail.textContent = JSON.stringify(chosen, null, 2);
  };
  view.append(renderLegend(colors));
  view.append(renderHighlights(segments, reveal));
  view.append(renderAnnotationTable(annotationRows(records), (id) => reveal([id])));
  view.append(detail);
  swap("doc", view);
}

// Rebase utf16 spans onto the fetched window and clip whatever straddles its
// edges, so the segment builder can treat the slice as a whole document.
function shiftIntoWindow(
  records: AnnotationRecord[],
  utf16Base: number,
  windowLength: number,
): AnnotationRecord[] {
  const clamp = (offset: number) => Math.max(0, Math.min(offset - utf16Base, windowLength));
  return records.map((record) => ({
    ...record,
    utf16_spans: record.utf16_spans.map(([s, e]): [number, number] => [clamp(s), clamp(e)]),
  }));
}

async function boot(): Promise<void> {
  const modules = await client.listModules();
  state.moduleNames = modules.map((descriptor) => descriptor.name);
  if (state.moduleNames.length === 0) {
    swap("graph", renderEmptyState("no modules are registered on this service"));
  } else {
    await refreshGraph();
  }
  const collections = await client.listCollections();
  const first = collections[0];
  if (!first || first.documents === 0) {
    swap("doc", renderEmptyState("the collection has no documents yet"));
    return;
  }
  state.collection = first.name;
  state.docIds = [...first.document_ids];
  swap("doc", docPicker());
}

async function guard(step: () => Promise<void>): Promise<void> {
  try {
    await step();
  } catch (err) {
    if (isUnreachable(err)) {
      swap("banner", renderBanner(String((err as Error).message), () => void guard(boot)));
      return;
    }
    if (err instanceof ApiError) {
      swap("banner", renderBanner(`${err.status}: ${err.message}`));
      return;
    }
    throw err;
  }
}

void guard(boot);
