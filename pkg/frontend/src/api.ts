import type {
  AnnotationRecord,
  CollectionInfo,
  DocumentInfo,
  ModuleGraph,
  ModuleInfo,
  NewDocument,
  PipelineSpec,
  PlanVerdict,
  RunInfo,
  RunRequest,
  RunTicket,
  SubstringEcho,
} from "./types.js";

/** The service answered, but with an error body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service could not be reached at all (down, wrong port, network). */
export class ServiceUnreachable extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ServiceUnreachable";
  }
}

export function isUnreachable(err: unknown): err is ServiceUnreachable {
  return err instanceof ServiceUnreachable;
}

interface AnnotationQuery {
  type?: string;
  start?: number;
  end?: number;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceUnreachable(
        `cannot reach ${this.baseUrl || "the service"}: ${String(err)}`,
      );
    }
    if (!response.ok) {
      let payload: { error?: unknown; detail?: unknown } | null = null;
      try {
        payload = await response.json();
      } catch {
        payload = null; // non-JSON error body; fall back to the status line
      }
      const message =
        payload && typeof payload.error === "string"
          ? payload.error
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, message, payload ? (payload.detail ?? null) : null);
    }
    return (await response.json()) as T;
  }

  listModules(): Promise<ModuleInfo[]> {
    return this.request("GET", "/api/modules");
  }

  moduleGraph(): Promise<ModuleGraph> {
    return this.request("GET", "/api/modules/graph");
  }

  listCollections(): Promise<CollectionInfo[]> {
    return this.request("GET", "/api/collections");
  }

  addDocument(
    collection: string,
    body: { doc_id: string; text?: string; source_path?: string },
  ): Promise<NewDocument> {
    return this.request("POST", `/api/collections/${encodeURIComponent(collection)}/documents`, body);
  }

  getDocument(docId: string): Promise<DocumentInfo> {
    return this.request("GET", `/api/documents/${encodeURIComponent(docId)}`);
  }

  getAnnotations(docId: string, query: AnnotationQuery = {}): Promise<AnnotationRecord[]> {
    const params = new URLSearchParams();
    if (query.type !== undefined) params.set("type", query.type);
    if (query.start !== undefined) params.set("start", String(query.start));
    if (query.end !== undefined) params.set("end", String(query.end));
    const suffix = params.size > 0 ? `?${params}` : "";
    return this.request("GET", `/api/documents/${encodeURIComponent(docId)}/annotations${suffix}`);
  }

  /** Byte-addressed slice of the stored text, echoed back by the server. */
  substring(docId: string, start: number, end: number): Promise<SubstringEcho> {
    const params = new URLSearchParams({ start: String(start), end: String(end) });
    return this.request("GET", `/api/documents/${encodeURIComponent(docId)}/substring?${params}`);
  }

  plan(pipeline: PipelineSpec): Promise<PlanVerdict> {
    return this.request("POST", "/api/pipelines/plan", pipeline);
  }

  startRun(request: RunRequest): Promise<RunTicket> {
    return this.request("POST", "/api/runs", request);
  }

  getRun(runId: string): Promise<RunInfo> {
    return this.request("GET", `/api/runs/${encodeURIComponent(runId)}`);
  }
}
