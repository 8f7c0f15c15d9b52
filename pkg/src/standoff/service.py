"""HTTP gateway over one collection, the registry, and the pipeline engine.

Every mutation goes through the same library calls the command line uses;
the service adds no behavior of its own beyond run bookkeeping. Runs are
asynchronous: POST /api/runs returns a token immediately and the client
polls /api/runs/{id}. Execution happens on a single background worker, so
documents are never written concurrently.

Because annotation offsets count UTF-8 bytes while browsers index strings
in UTF-16 code units, annotation listings carry both the raw spans and
their code-unit equivalents, plus the covered text per span; a substring
echo endpoint serves as the client's fidelity oracle. Clients never need
their own byte arithmetic.

Errors are uniform: ``{"error": str, "detail": ...}`` with 400 for parse
problems, 404 for missing resources, 422 for validation failures.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Union

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .builtin import standard_engine
from .collection import Collection, open_collection
from .errors import CollectionError, PipelineError, StandoffError
from .jsonio import encode_annotation, encode_attrs
from .pipeline import DEFAULT_TIMEOUT, PipelineEngine, load_pipeline
from .registry import build_compat_graph, serialize_descriptor
from .store import Document, Span

RUN_QUEUED = "queued"
RUN_RUNNING = "running"
RUN_DONE = "done"
RUN_FAILED = "failed"


class ApiError(Exception):
    """Carries a status code plus the uniform error body."""

    def __init__(self, status: int, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.detail = detail


class RunHandle:
    """Bookkeeping for one asynchronous run; states move strictly forward."""

    _ORDER = {RUN_QUEUED: 0, RUN_RUNNING: 1, RUN_DONE: 2, RUN_FAILED: 2}

    def __init__(self, run_id: str, pipeline_name: str):
        self.run_id = run_id
        self.pipeline_name = pipeline_name
        self.state = RUN_QUEUED
        self.reports = []
        self.error = ""
        self._lock = threading.Lock()

    def advance(self, state: str, reports=None, error: str = "") -> None:
        with self._lock:
            if self._ORDER[state] < self._ORDER[self.state]:
                raise RuntimeError(f"run state may not move {self.state} -> {state}")
            self.state = state
            if reports is not None:
                self.reports = reports
            if error:
                self.error = error

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "run_id": self.run_id,
                "pipeline": self.pipeline_name,
                "state": self.state,
                "reports": [report.to_dict() for report in self.reports],
                "error": self.error,
            }


def _byte_to_utf16_map(text: str, positions: Iterable[int]) -> dict[int, int]:
    """Map byte offsets to UTF-16 code-unit offsets in one pass.

    Offsets inside a multi-byte character clamp to that character's start.
    """
    wanted = sorted(set(positions))
    out: dict[int, int] = {}
    i = 0
    byte_pos = 0
    units = 0
    for ch in text:
        if i >= len(wanted):
            break
        width = len(ch.encode("utf-8"))
        while i < len(wanted) and wanted[i] < byte_pos + width:
            out[wanted[i]] = units
            i += 1
        byte_pos += width
        units += len(ch.encode("utf-16-le")) // 2
    while i < len(wanted):
        out[wanted[i]] = units
        i += 1
    return out


def _annotation_record(doc: Document, ann, utf16: dict[int, int]) -> dict:
    record = encode_annotation(ann)
    record["span_texts"] = [
        doc.span_bytes(span).decode("utf-8", errors="replace") for span in ann.spans
    ]
    record["utf16_spans"] = [[utf16[span.start], utf16[span.end]] for span in ann.spans]
    return record


def create_app(
    collection: Union[Collection, str, Path],
    *,
    modules_dirs: Iterable[Union[str, Path]] = (),
    ui_dir: Optional[Union[str, Path]] = None,
    engine: Optional[PipelineEngine] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> FastAPI:
    if not isinstance(collection, Collection):
        collection = open_collection(collection)
    if engine is None:
        engine = standard_engine(modules_dirs, timeout=timeout)

    app = FastAPI(title="standoff service", docs_url=None, redoc_url=None)
    runs: dict[str, RunHandle] = {}
    runs_lock = threading.Lock()
    write_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="standoff-run")
    app.state.collection = collection
    app.state.engine = engine

    def fail(status: int, message: str, detail=None):
        raise ApiError(status, message, detail)

    @app.exception_handler(ApiError)
    def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.message, "detail": exc.detail}
        )

    @app.exception_handler(RequestValidationError)
    def _validation_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        parse_problem = any("json" in (e.get("type") or "") for e in errors)
        return JSONResponse(
            status_code=400 if parse_problem else 422,
            content={
                "error": "request does not parse" if parse_problem else "invalid request",
                "detail": [
                    {"where": [str(p) for p in e.get("loc", ())], "message": e.get("msg", "")}
                    for e in errors
                ],
            },
        )

    @app.exception_handler(StandoffError)
    def _standoff_error(request: Request, exc: StandoffError):
        return JSONResponse(status_code=422, content={"error": str(exc), "detail": None})

    def load_doc(doc_id: str) -> Document:
        if doc_id not in collection:
            fail(404, f"unknown document {doc_id!r}")
        try:
            return collection.load_document(doc_id)
        except (CollectionError, OSError) as exc:
            fail(404, f"document {doc_id!r} cannot be loaded", str(exc))

    @app.get("/api/modules")
    def list_modules():
        return [serialize_descriptor(descriptor) for descriptor in engine.registry]

    @app.get("/api/modules/graph")
    def module_graph():
        return build_compat_graph(engine.registry).to_dict()

    @app.get("/api/collections")
    def list_collections():
        return [
            {
                "name": collection.name,
                "root": str(collection.root),
                "documents": len(collection),
                "document_ids": collection.document_ids(),
                "missing_sources": sorted(collection.missing),
            }
        ]

    @app.post("/api/collections/{name}/documents", status_code=201)
    def add_document(name: str, payload: dict = Body(...)):
        if name != collection.name:
            fail(404, f"unknown collection {name!r}")
        unknown = set(payload) - {"doc_id", "text", "source_path", "attributes"}
        if unknown:
            fail(422, f"unknown document keys {sorted(unknown)}")
        doc_id = payload.get("doc_id")
        if not isinstance(doc_id, str) or not doc_id:
            fail(422, "doc_id must be a non-empty string")
        text = payload.get("text")
        source_path = payload.get("source_path")
        if (text is None) == (source_path is None):
            fail(422, "exactly one of text or source_path is required")
        if text is not None and not isinstance(text, str):
            fail(422, "text must be a string")
        if source_path is not None and not isinstance(source_path, str):
            fail(422, "source_path must be a string")
        attributes = payload.get("attributes") or {}
        if not isinstance(attributes, dict):
            fail(422, "attributes must be an object")
        try:
            with write_lock:
                doc = collection.add_document(
                    doc_id, text, source_path=source_path, attributes=attributes
                )
        except (CollectionError, StandoffError) as exc:
            fail(422, str(exc))
        except OSError as exc:
            fail(422, f"cannot read source: {exc}")
        return {"doc_id": doc.doc_id, "digest": doc.digest, "length": len(doc)}

    @app.get("/api/documents/{doc_id}")
    def get_document(doc_id: str):
        doc = load_doc(doc_id)
        types: dict[str, int] = {}
        for ann in doc.get_annotations():
            types[ann.ann_type] = types.get(ann.ann_type, 0) + 1
        source = collection.doc_index[doc_id]
        return {
            "doc_id": doc.doc_id,
            "text": doc.text,
            "digest": doc.digest,
            "length": len(doc),
            "attributes": encode_attrs(doc.attributes),
            "annotation_count": sum(types.values()),
            "annotation_types": types,
            "source": {"mode": source.mode, "path": source.path},
            "stale_digest": doc.stale_digest,
        }

    @app.get("/api/documents/{doc_id}/annotations")
    def get_annotations(
        doc_id: str,
        type: Optional[str] = None,
        start: Optional[int] = None,
        end: Optional[int] = None,
    ):
        doc = load_doc(doc_id)
        if (start is None) != (end is None):
            fail(422, "start and end must be supplied together")
        if start is not None:
            if start < 0 or end < start or end > len(doc):
                fail(422, f"window ({start}, {end}) out of range for length {len(doc)}")
            selected = doc.select_overlapping(Span(start, end), type)
        else:
            selected = doc.get_annotations(type)
        positions = [p for ann in selected for span in ann.spans for p in span]
        utf16 = _byte_to_utf16_map(doc.text, positions)
        return [_annotation_record(doc, ann, utf16) for ann in selected]

    @app.get("/api/documents/{doc_id}/substring")
    def get_substring(doc_id: str, start: int, end: int):
        doc = load_doc(doc_id)
        if start < 0 or end < start or end > len(doc):
            fail(422, f"span ({start}, {end}) out of range for length {len(doc)}")
        utf16 = _byte_to_utf16_map(doc.text, (start, end))
        return {
            "doc_id": doc_id,
            "start": start,
            "end": end,
            "text": doc.span_bytes(Span(start, end)).decode("utf-8", errors="replace"),
            "utf16_start": utf16[start],
            "utf16_end": utf16[end],
        }

    @app.post("/api/pipelines/plan")
    def plan_pipeline(payload: dict = Body(...)):
        try:
            pipeline = load_pipeline(payload)
            report = engine.plan(pipeline)
        except PipelineError as exc:
            fail(422, str(exc))
        except StandoffError as exc:
            fail(422, str(exc))
        return report.to_dict()

    def _execute(handle: RunHandle, pipeline, doc_ids, skip_satisfied: bool) -> None:
        handle.advance(RUN_RUNNING)
        try:
            with write_lock:
                reports = engine.run_collection(
                    pipeline, collection, doc_ids=doc_ids, skip_satisfied=skip_satisfied
                )
        except Exception as exc:  # run machinery itself broke
            handle.advance(RUN_FAILED, error=f"{type(exc).__name__}: {exc}")
            return
        handle.advance(RUN_DONE, reports=reports)

    @app.post("/api/runs", status_code=202)
    def start_run(payload: dict = Body(...)):
        unknown = set(payload) - {"pipeline", "doc_ids", "skip_satisfied"}
        if unknown:
            fail(422, f"unknown run keys {sorted(unknown)}")
        if "pipeline" not in payload:
            fail(422, "run requires a pipeline")
        try:
            pipeline = load_pipeline(payload["pipeline"])
            plan = engine.plan(pipeline)
        except (PipelineError, StandoffError) as exc:
            fail(422, str(exc))
        if not plan.ok:
            fail(422, "pipeline does not plan", plan.to_dict())
        doc_ids = payload.get("doc_ids")
        if doc_ids is not None:
            if not isinstance(doc_ids, list) or not all(isinstance(d, str) for d in doc_ids):
                fail(422, "doc_ids must be a list of strings")
            missing = [d for d in doc_ids if d not in collection]
            if missing:
                fail(404, f"unknown documents {missing}")
        skip_satisfied = payload.get("skip_satisfied", False)
        if not isinstance(skip_satisfied, bool):
            fail(422, "skip_satisfied must be a flag")
        handle = RunHandle(uuid.uuid4().hex, pipeline.name)
        with runs_lock:
            runs[handle.run_id] = handle
        executor.submit(_execute, handle, pipeline, doc_ids, skip_satisfied)
        return {"run_id": handle.run_id, "state": handle.state}

    @app.get("/api/runs/{run_id}")
    def poll_run(run_id: str):
        with runs_lock:
            handle = runs.get(run_id)
        if handle is None:
            fail(404, f"unknown run {run_id!r}")
        return handle.to_dict()

    if ui_dir is not None:
        ui_path = Path(ui_dir)
        if not ui_path.is_dir():
            raise CollectionError(f"ui directory {ui_path} does not exist")
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app


def serve(
    collection_root: Union[str, Path],
    *,
    host: str = "127.0.0.1",
    port: int = 8400,
    modules_dirs: Iterable[Union[str, Path]] = (),
    ui_dir: Optional[Union[str, Path]] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> None:
    """Run the service until interrupted. Validates roots before binding."""
    import uvicorn

    app = create_app(collection_root, modules_dirs=modules_dirs, ui_dir=ui_dir, timeout=timeout)
    uvicorn.run(app, host=host, port=port, log_level="info")
