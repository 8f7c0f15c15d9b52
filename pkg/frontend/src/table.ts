import type { AnnotationRecord, AttrMap, RunReport, ViewerHint } from "./types.js";

export interface Row {
  id: number;
  type: string;
  spans: string;
  attributes: string;
  record: AnnotationRecord;
}

export function formatSpan([start, end]: [number, number]): string {
  return `${start}..${end}`;
}

export function formatAttrs(attrs: AttrMap): string {
  return Object.entries(attrs)
    .map(([name, held]) => `${name}=${held.value}`)
    .join(" ");
}

/** One row per record, in exactly the order the server returned them. */
export function annotationRows(records: AnnotationRecord[]): Row[] {
  return records.map((record) => ({
    id: record.id,
    type: record.type,
    spans: record.spans.map(formatSpan).join(", "),
    attributes: formatAttrs(record.attributes),
    record,
  }));
}

/** Annotations added by a run, totalled per type across its stages. */
export function addedByType(report: RunReport): Record<string, number> {
  const totals: Record<string, number> = {};
  for (const stage of report.stages) {
    for (const [annType, count] of Object.entries(stage.added)) {
      totals[annType] = (totals[annType] ?? 0) + count;
    }
  }
  return totals;
}

// No parse-tree widget ships; a "tree" hint gets the generic table instead.
export function resolveViewer(hint: ViewerHint): ViewerHint {
  return hint === "tree" ? "generic-table" : hint;
}

export const RENDER_WINDOW_BYTES = 1 << 20;

export interface RenderWindow {
  start: number;
  end: number;
  windowed: boolean;
  pages: number;
}

/** Large documents are rendered a byte window at a time. */
export function renderWindow(
  lengthBytes: number,
  page = 0,
  limit = RENDER_WINDOW_BYTES,
): RenderWindow {
  if (lengthBytes <= limit) {
    return { start: 0, end: lengthBytes, windowed: false, pages: 1 };
  }
  const pages = Math.ceil(lengthBytes / limit);
  const bounded = Math.min(Math.max(page, 0), pages - 1);
  const start = bounded * limit;
  return { start, end: Math.min(start + limit, lengthBytes), windowed: true, pages };
}
