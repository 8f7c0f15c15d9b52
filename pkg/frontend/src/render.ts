import type { CandidateState, GatingState } from "./gating.js";
import { tooltipFor } from "./gating.js";
import type { Segment } from "./highlight.js";
import type { Row } from "./table.js";
import type { PlanProblem, RunInfo, RunReport, StageReport } from "./types.js";
import { addedByType } from "./table.js";

type Child = Node | string;

export function el(tag: string, attrs: Record<string, string> = {}, ...children: Child[]): HTMLElement {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function renderLegend(colors: Map<string, string>): HTMLElement {
  const legend = el("div", { class: "legend" });
  for (const [value, color] of colors) {
    legend.append(
      el("span", { class: "legend-entry" },
        el("span", { class: "legend-swatch", style: `background:${color}` }),
        value || "(no value)"),
    );
  }
  return legend;
}

/**
 * The document text with covered segments wrapped in <mark>. Text nodes are
 * the segment slices verbatim, so container.textContent is the document.
 */
export function renderHighlights(
  segments: Segment[],
  onPick?: (annIds: number[]) => void,
): HTMLElement {
  const container = el("div", { class: "doc-text" });
  for (const segment of segments) {
    if (!segment.covered) {
      container.append(segment.text);
      continue;
    }
    const mark = el("mark", { class: "hl", "data-ann": segment.annIds.join(",") }, segment.text);
    if (segment.label) mark.setAttribute("title", segment.label);
    if (segment.color) mark.setAttribute("style", `background:${segment.color}`);
    if (onPick) mark.addEventListener("click", () => onPick(segment.annIds));
    container.append(mark);
  }
  return container;
}

export function renderAnnotationTable(rows: Row[], onPick?: (id: number) => void): HTMLElement {
  const table = el("table", { class: "annotations" });
  const head = el("tr", {});
  for (const caption of ["id", "type", "spans", "attributes"]) {
    head.append(el("th", {}, caption));
  }
  table.append(head);
  for (const row of rows) {
    const tr = el(
      "tr",
      { "data-id": String(row.id) },
      el("td", {}, String(row.id)),
      el("td", {}, row.type),
      el("td", {}, row.spans),
      el("td", {}, row.attributes),
    );
    if (onPick) tr.addEventListener("click", () => onPick(row.id));
    table.append(tr);
  }
  return table;
}

export interface GraphHandlers {
  onPick?: (module: string) => void;
  onClear?: () => void;
  onSubmit?: () => void;
}

function candidateButton(candidate: CandidateState, handlers: GraphHandlers): HTMLElement {
  const button = el("button", { class: "stage-choice", "data-module": candidate.module },
    candidate.module);
  const hover = tooltipFor(candidate);
  if (hover) button.setAttribute("title", hover);
  if (!candidate.enabled) {
    (button as HTMLButtonElement).disabled = true;
    button.classList.add("disabled");
  } else if (handlers.onPick) {
    button.addEventListener("click", () => handlers.onPick!(candidate.module));
  }
  return button;
}

export function renderGraphPanel(gating: GatingState, handlers: GraphHandlers = {}): HTMLElement {
  const panel = el("div", { class: "graph-panel" });
  const sequence = el("div", { class: "sequence" },
    gating.selected.length > 0 ? gating.selected.join(" → ") : "(empty pipeline)");
  panel.append(sequence);

  const choices = el("div", { class: "choices" });
  for (const candidate of gating.candidates) {
    choices.append(candidateButton(candidate, handlers));
  }
  panel.append(choices);

  if (gating.currentVerdict && gating.currentVerdict.warnings.length > 0) {
    const warnings = el("ul", { class: "warnings" });
    for (const warning of gating.currentVerdict.warnings) {
      warnings.append(el("li", {}, warning));
    }
    panel.append(warnings);
  }

  const submit = el("button", { class: "submit-run" }, "run pipeline") as HTMLButtonElement;
  submit.disabled = !gating.submittable;
  if (handlers.onSubmit) submit.addEventListener("click", handlers.onSubmit);
  const clear = el("button", { class: "clear-stages" }, "clear") as HTMLButtonElement;
  if (handlers.onClear) clear.addEventListener("click", handlers.onClear);
  panel.append(el("div", { class: "graph-actions" }, submit, clear));
  return panel;
}

function renderStage(stage: StageReport): HTMLElement {
  const added = Object.entries(stage.added)
    .map(([annType, count]) => `${annType}: ${count}`)
    .join(", ");
  const row = el(
    "tr",
    { class: `stage stage-${stage.status}` },
    el("td", {}, stage.module),
    el("td", {}, stage.status),
    el("td", {}, added || "–"),
    el("td", {}, String(stage.attributes_added)),
    el("td", {}, stage.message),
  );
  return row;
}

function renderReport(report: RunReport): HTMLElement {
  const block = el("div", { class: `run-report ${report.ok ? "ok" : "failed"}` });
  block.append(el("h3", {}, `${report.doc_id}: ${report.ok ? "ok" : "failed"}`));
  const table = el("table", { class: "stages" });
  const head = el("tr", {});
  for (const caption of ["stage", "status", "added", "attrs", "message"]) {
    head.append(el("th", {}, caption));
  }
  table.append(head);
  for (const stage of report.stages) {
    table.append(renderStage(stage));
  }
  block.append(table);
  const counts = Object.entries(addedByType(report))
    .map(([annType, count]) => `${annType}: ${count}`)
    .join(", ");
  block.append(el("p", { class: "type-counts" }, counts ? `added ${counts}` : "nothing added"));
  const broken = report.stages.find((stage) => stage.status === "failed");
  if (broken) {
    block.append(el("pre", { class: "stage-error" }, broken.message));
    if (broken.stderr) block.append(el("pre", { class: "stage-stderr" }, broken.stderr));
  }
  return block;
}

export function renderRunPanel(run: RunInfo): HTMLElement {
  const panel = el("div", { class: "run-panel" });
  panel.append(el("p", { class: "run-state" }, `run ${run.run_id.slice(0, 8)}: ${run.state}`));
  if (run.error) panel.append(el("pre", { class: "run-error" }, run.error));
  for (const report of run.reports) {
    panel.append(renderReport(report));
  }
  return panel;
}

/** Shown inline when the server refuses to queue a run (422). */
export function renderPlanRejection(message: string, problems: PlanProblem[]): HTMLElement {
  const box = el("div", { class: "plan-rejection" }, el("p", {}, message));
  const list = el("ul", {});
  for (const problem of problems) {
    list.append(el("li", {}, problem.message));
  }
  box.append(list);
  return box;
}

export function renderBanner(message: string, onRetry?: () => void): HTMLElement {
  const banner = el("div", { class: "banner" }, el("span", {}, message));
  if (onRetry) {
    const retry = el("button", { class: "retry" }, "retry");
    retry.addEventListener("click", onRetry);
    banner.append(retry);
  }
  return banner;
}

export function renderEmptyState(message: string): HTMLElement {
  return el("div", { class: "empty-state" }, message);
}
