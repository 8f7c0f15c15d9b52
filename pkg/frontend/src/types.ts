// Payload shapes returned by the annotation service. Field names mirror the
// JSON exactly; everything in this file is data, no behaviour.

export interface AttrValue {
  kind: "text" | "int" | "ref";
  value: string | number;
}

export type AttrMap = Record<string, AttrValue>;

export interface Condition {
  type: string;
  attrs: string[];
}

export interface ParamSpec {
  name: string;
  kind: "text" | "int" | "flag";
  default: string | number | boolean;
}

export type ViewerHint = "none" | "generic-table" | "highlight" | "tree";

export interface ModuleInfo {
  name: string;
  coupling: "in-process" | "external";
  command: string[];
  pre: Condition[];
  post: Condition[];
  params: ParamSpec[];
  viewer: ViewerHint;
}

export interface GraphEdge {
  from: string;
  to: string;
  types: string[];
}

export interface ModuleGraph {
  nodes: string[];
  edges: GraphEdge[];
}

export interface CollectionInfo {
  name: string;
  root: string;
  documents: number;
  document_ids: string[];
  missing_sources: string[];
}

export interface DocumentInfo {
  doc_id: string;
  text: string;
  digest: string;
  /** Byte length, not code units. */
  length: number;
  attributes: AttrMap;
  annotation_count: number;
  annotation_types: Record<string, number>;
  source: { mode: string; path: string | null };
  stale_digest: boolean;
}

export interface AnnotationRecord {
  id: number;
  type: string;
  /** Byte offsets into the UTF-8 form of the document. */
  spans: [number, number][];
  attributes: AttrMap;
  span_texts: string[];
  /** The same spans as code-unit offsets into DocumentInfo.text. */
  utf16_spans: [number, number][];
}

export interface SubstringEcho {
  doc_id: string;
  start: number;
  end: number;
  text: string;
  /** Code-unit offsets of the same slice in the full document text. */
  utf16_start: number;
  utf16_end: number;
}

export type StageEntry = string | { module: string; params?: Record<string, unknown> };

export interface PipelineSpec {
  name?: string;
  inputs?: string[];
  stages: StageEntry[];
}

export interface PlanProblem {
  stage: number;
  module: string;
  type: string;
  missing_attributes: string[];
  message: string;
}

export interface PlanVerdict {
  pipeline: string;
  ok: boolean;
  stages: string[];
  problems: PlanProblem[];
  warnings: string[];
}

export interface StageReport {
  module: string;
  params: Record<string, unknown>;
  status: "ok" | "failed" | "skipped";
  added: Record<string, number>;
  attributes_added: number;
  seconds: number;
  message: string;
  stderr: string;
}

export interface RunReport {
  pipeline: string;
  doc_id: string;
  ok: boolean;
  total_added: number;
  stages: StageReport[];
  error: string;
}

export type RunState = "queued" | "running" | "done" | "failed";

export interface RunInfo {
  run_id: string;
  pipeline: string;
  state: RunState;
  reports: RunReport[];
  error: string;
}

export interface RunRequest {
  pipeline: PipelineSpec;
  doc_ids?: string[];
  skip_satisfied?: boolean;
}

export interface RunTicket {
  run_id: string;
  state: RunState;
}

export interface NewDocument {
  doc_id: string;
  digest: string;
  length: number;
}
