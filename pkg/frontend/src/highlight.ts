import type { ApiClient } from "./api.js";
import type { AnnotationRecord } from "./types.js";

// Turns annotation records into a flat list of text segments that cover the
// document exactly once. Offsets are the server-supplied utf16_spans; the
// client never recomputes byte positions from the text.

export interface Segment {
  /** Code-unit slice of the document; concatenating all segments re-forms it. */
  text: string;
  start: number;
  end: number;
  covered: boolean;
  annIds: number[];
  /** Attribute value of the first covering annotation, when requested. */
  label: string;
  color: string;
}

export interface Region {
  start: number;
  end: number;
  text: string;
  label: string;
  annIds: number[];
}

const PALETTE = [
  "#ffe08a",
  "#b5e8b0",
  "#aed6f1",
  "#f5b7b1",
  "#d7bde2",
  "#a3e4d7",
  "#f8c471",
  "#d5dbdb",
];

/** Stable colour per distinct value, in first-seen order. */
export function colorScale(values: string[]): Map<string, string> {
  const colors = new Map<string, string>();
  for (const value of values) {
    if (!colors.has(value)) {
      colors.set(value, PALETTE[colors.size % PALETTE.length]!);
    }
  }
  return colors;
}

export function attributeValues(records: AnnotationRecord[], attr: string): string[] {
  const seen: string[] = [];
  for (const record of records) {
    const held = record.attributes[attr];
    if (held === undefined) continue;
    const value = String(held.value);
    if (!seen.includes(value)) seen.push(value);
  }
  return seen;
}

function labelOf(record: AnnotationRecord, attr: string): string {
  const held = record.attributes[attr];
  return held === undefined ? "" : String(held.value);
}

export function buildSegments(
  text: string,
  records: AnnotationRecord[],
  labelAttr: string = "",
  colors: Map<string, string> = new Map(),
): Segment[] {
  const cuts = new Set<number>([0, text.length]);
  for (const record of records) {
    for (const [start, end] of record.utf16_spans) {
      cuts.add(start);
      cuts.add(end);
    }
  }
  const points = [...cuts].sort((a, b) => a - b);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < points.length; i++) {
    const start = points[i]!;
    const end = points[i + 1]!;
    const covering = records.filter((record) =>
      record.utf16_spans.some(([s, e]) => s < end && e > start),
    );
    const first = covering[0];
    const label = first === undefined ? "" : labelOf(first, labelAttr);
    segments.push({
      text: text.slice(start, end),
      start,
      end,
      covered: covering.length > 0,
      annIds: covering.map((record) => record.id),
      label,
      color: colors.get(label) ?? "",
    });
  }
  return segments;
}

/** Maximal runs of covered segments; what a reader perceives as one mark. */
export function regions(segments: Segment[]): Region[] {
  const found: Region[] = [];
  let open: Region | null = null;
  for (const segment of segments) {
    if (!segment.covered) {
      open = null;
      continue;
    }
    if (open === null) {
      open = {
        start: segment.start,
        end: segment.end,
        text: segment.text,
        label: segment.label,
        annIds: [...segment.annIds],
      };
      found.push(open);
    } else {
      open.end = segment.end;
      open.text += segment.text;
      for (const id of segment.annIds) {
        if (!open.annIds.includes(id)) open.annIds.push(id);
      }
    }
  }
  return found;
}

export interface SpanMismatch {
  id: number;
  spanIndex: number;
  local: string;
  server: string;
}

/**
 * Compare what the client would display for every span against the server's
 * byte-addressed substring echo. An empty result means the on-screen text is
 * exactly the stored text for each span.
 */
export async function verifySpans(
  client: ApiClient,
  docId: string,
  text: string,
  records: AnnotationRecord[],
): Promise<SpanMismatch[]> {
  const mismatches: SpanMismatch[] = [];
  for (const record of records) {
    for (let i = 0; i < record.spans.length; i++) {
      const [byteStart, byteEnd] = record.spans[i]!;
      const [u16Start, u16End] = record.utf16_spans[i]!;
      const local = text.slice(u16Start, u16End);
      const echo = await client.substring(docId, byteStart, byteEnd);
      if (local !== echo.text) {
        mismatches.push({ id: record.id, spanIndex: i, local, server: echo.text });
      }
    }
  }
  return mismatches;
}
