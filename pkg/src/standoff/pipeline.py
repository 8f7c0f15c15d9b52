"""Planning and execution of ordered module sequences over documents.

A pipeline is an explicit list of stages; the engine validates the chain of
preconditions against promised postconditions (it never reorders), then runs
stages strictly in sequence over one document. Stage output is buffered and
applied only after every span, attribute value, and reference has been
checked, so a failing stage leaves the document exactly as it was.

Execution is add-only: existing annotations keep their ids, types, and
spans; the only sanctioned mutation is gaining a new attribute. External
modules run as subprocesses speaking a one-request, one-response JSON line
protocol on stdin/stdout; ids are assigned by the engine, never by the
module.
"""

from __future__ import annotations

import json
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .collection import Collection
from .errors import (
    AnnotationError,
    CollectionError,
    PipelineError,
    StandoffError,
    WireProtocolError,
)
from .jsonio import decode_attrs, decode_spans, encode_annotation
from .registry import Registry, ModuleDescriptor, EXTERNAL
from .store import AnnRef, AttrValue, Document, Span, attr_kind

PROTO_VERSION = 1
DEFAULT_TIMEOUT = 60.0

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_SKIPPED = "skipped"


@dataclass
class NewAnnotation:
    """A stage's proposal: one annotation to add, id assigned on apply."""

    ann_type: str
    spans: tuple[Span, ...]
    attributes: dict[str, AttrValue] = field(default_factory=dict)


@dataclass
class StageOutput:
    """Everything a stage wants to change, buffered for atomic application.

    ``attribute_additions`` entries are (annotation id, name, value) and may
    target only annotations that existed before the stage ran.
    """

    new_annotations: list[NewAnnotation] = field(default_factory=list)
    attribute_additions: list[tuple[int, str, AttrValue]] = field(default_factory=list)


@dataclass
class Stage:
    module: str
    params: dict = field(default_factory=dict)


@dataclass
class Pipeline:
    """Ordered module sequence; ``inputs`` are annotation types assumed present."""

    name: str
    stages: list[Stage]
    inputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class PlanProblem:
    stage_index: int
    module: str
    ann_type: str
    missing_attributes: tuple[str, ...] = ()

    @property
    def message(self) -> str:
        detail = f"stage {self.stage_index} ({self.module}): no earlier stage or input provides {self.ann_type!r}"
        if self.missing_attributes:
            detail += f" with attributes {list(self.missing_attributes)}"
        return detail


@dataclass
class PlanReport:
    """Verdict of static validation: stage order echoed, never reordered."""

    pipeline: str
    stages: list[str]
    problems: list[PlanProblem]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "ok": self.ok,
            "stages": list(self.stages),
            "problems": [
                {
                    "stage": p.stage_index,
                    "module": p.module,
                    "type": p.ann_type,
                    "missing_attributes": list(p.missing_attributes),
                    "message": p.message,
                }
                for p in self.problems
            ],
            "warnings": list(self.warnings),
        }


@dataclass
class StageRecord:
    module: str
    params: dict
    status: str
    added: dict[str, int] = field(default_factory=dict)
    attributes_added: int = 0
    seconds: float = 0.0
    message: str = ""
    stderr: str = ""

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "params": dict(self.params),
            "status": self.status,
            "added": dict(self.added),
            "attributes_added": self.attributes_added,
            "seconds": self.seconds,
            "message": self.message,
            "stderr": self.stderr,
        }


@dataclass
class RunReport:
    pipeline: str
    doc_id: str
    stages: list[StageRecord]
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and all(s.status != STATUS_FAILED for s in self.stages)

    @property
    def total_added(self) -> int:
        return sum(sum(record.added.values()) for record in self.stages)

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "doc_id": self.doc_id,
            "ok": self.ok,
            "total_added": self.total_added,
            "stages": [record.to_dict() for record in self.stages],
            "error": self.error,
        }


def load_pipeline(data: dict) -> Pipeline:
    """Build a pipeline from its JSON object form.

    Schema: ``{"name": str, "inputs": [type,...], "stages": [{"module": str,
    "params": {...}},...]}``; name and inputs are optional.
    """
    if not isinstance(data, dict):
        raise PipelineError("pipeline must be a JSON object")
    unknown = set(data) - {"name", "inputs", "stages"}
    if unknown:
        raise PipelineError(f"unknown pipeline keys {sorted(unknown)}")
    name = data.get("name", "pipeline")
    if not isinstance(name, str) or not name:
        raise PipelineError("pipeline name must be a non-empty string")
    inputs = data.get("inputs", [])
    if not isinstance(inputs, list) or not all(isinstance(t, str) for t in inputs):
        raise PipelineError("pipeline inputs must be a list of type names")
    raw_stages = data.get("stages")
    if not isinstance(raw_stages, list):
        raise PipelineError("pipeline requires a list of stages")
    stages = []
    for index, raw in enumerate(raw_stages):
        if isinstance(raw, str):
            stages.append(Stage(raw))
            continue
        if not isinstance(raw, dict) or not isinstance(raw.get("module"), str):
            raise PipelineError(f"stage {index}: expected a module name or {{module, params}}")
        unknown = set(raw) - {"module", "params"}
        if unknown:
            raise PipelineError(f"stage {index}: unknown keys {sorted(unknown)}")
        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise PipelineError(f"stage {index}: params must be an object")
        stages.append(Stage(raw["module"], dict(params)))
    return Pipeline(name, stages, tuple(inputs))


def serialize_pipeline(pipeline: Pipeline) -> dict:
    return {
        "name": pipeline.name,
        "inputs": list(pipeline.inputs),
        "stages": [{"module": s.module, "params": dict(s.params)} for s in pipeline.stages],
    }


ModuleImpl = Callable[[Document, dict], StageOutput]


def _validate_output(doc: Document, output: StageOutput):
    """Check a stage's whole output against the current document state.

    Returns the canonicalized additions. Raises without having touched the
    document; the caller applies only after this passes. References may
    target only annotations that already exist.
    """
    canonical = []
    for proposal in output.new_annotations:
        if not proposal.ann_type or not isinstance(proposal.ann_type, str):
            raise AnnotationError("proposed annotation has no type")
        spans = doc.check_spans(proposal.spans)
        attrs = dict(proposal.attributes)
        for name, value in attrs.items():
            attr_kind(value)
            if isinstance(value, AnnRef) and value.target not in doc:
                raise AnnotationError(
                    f"attribute {name!r} references annotation {value.target}, which does not exist"
                )
        canonical.append((proposal.ann_type, spans, attrs))

    planned: dict[tuple[int, str], AttrValue] = {}
    for ann_id, name, value in output.attribute_additions:
        ann = doc.get(ann_id)
        if ann is None:
            raise AnnotationError(f"attribute addition targets missing annotation {ann_id}")
        attr_kind(value)
        if isinstance(value, AnnRef) and value.target not in doc:
            raise AnnotationError(f"attribute {name!r} references missing annotation {value.target}")
        if name in ann.attributes and ann.attributes[name] != value:
            raise AnnotationError(
                f"annotation {ann_id} already has {name!r}; existing attribute values never change"
            )
        key = (ann_id, name)
        if key in planned and planned[key] != value:
            raise AnnotationError(f"conflicting additions for attribute {name!r} on annotation {ann_id}")
        planned[key] = value
    return canonical, planned


def apply_output(doc: Document, output: StageOutput) -> tuple[dict[str, int], int]:
    """Validate then apply a stage's output; all or nothing.

    Returns (annotations added by type, attribute additions applied).
    """
    canonical, planned = _validate_output(doc, output)
    added: dict[str, int] = {}
    for ann_type, spans, attrs in canonical:
        doc.add_annotation(ann_type, spans, attrs)
        added[ann_type] = added.get(ann_type, 0) + 1
    for (ann_id, name), value in planned.items():
        doc.add_attribute(ann_id, name, value)
    return added, len(planned)


def _exchange(
    descriptor: ModuleDescriptor,
    doc: Document,
    params: Mapping,
    timeout: float,
) -> tuple[StageOutput, str]:
    """One request/response round trip with an external module process."""
    pre_types = descriptor.pre_types()
    request = {
        "proto": PROTO_VERSION,
        "doc_id": doc.doc_id,
        "text": doc.text,
        "annotations": [
            encode_annotation(ann)
            for ann in doc.get_annotations()
            if ann.ann_type in pre_types
        ],
        "params": dict(params),
    }
    payload = (json.dumps(request, ensure_ascii=False) + "\n").encode("utf-8")
    try:
        proc = subprocess.run(
            list(descriptor.command),
            input=payload,
            capture_output=True,
            timeout=timeout,
        )
    except FileNotFoundError as exc:
        raise WireProtocolError(f"cannot start module command: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        partial = exc.stderr.decode("utf-8", errors="replace") if exc.stderr else ""
        raise WireProtocolError(f"module timed out after {timeout:g} s", partial) from exc

    stderr = proc.stderr.decode("utf-8", errors="replace")
    if proc.returncode != 0:
        raise WireProtocolError(f"module exited with status {proc.returncode}", stderr)
    try:
        text = proc.stdout.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise WireProtocolError(f"module output is not UTF-8: {exc}", stderr) from exc
    stripped = text.strip()
    if not stripped:
        raise WireProtocolError("module produced no response", stderr)
    try:
        data = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise WireProtocolError(f"module response is not valid JSON: {exc}", stderr) from exc

    if not isinstance(data, dict):
        raise WireProtocolError("module response must be a JSON object", stderr)
    if data.get("proto") != PROTO_VERSION:
        raise WireProtocolError(
            f"module response declares protocol {data.get('proto')!r}, expected {PROTO_VERSION}",
            stderr,
        )
    unknown = set(data) - {"proto", "new_annotations"}
    if unknown:
        raise WireProtocolError(f"unknown response keys {sorted(unknown)}", stderr)
    items = data.get("new_annotations")
    if not isinstance(items, list):
        raise WireProtocolError("response new_annotations must be a list", stderr)
    proposals = []
    for index, item in enumerate(items):
        context = f"new_annotations[{index}]"
        if not isinstance(item, dict):
            raise WireProtocolError(f"{context} must be an object", stderr)
        unknown = set(item) - {"type", "spans", "attributes"}
        if unknown:
            raise WireProtocolError(f"{context}: unknown keys {sorted(unknown)}", stderr)
        ann_type = item.get("type")
        if not isinstance(ann_type, str) or not ann_type:
            raise WireProtocolError(f"{context}: type must be a non-empty string", stderr)
        try:
            spans = decode_spans(item.get("spans"))
            attrs = decode_attrs(item.get("attributes", {}))
        except AnnotationError as exc:
            raise WireProtocolError(f"{context}: {exc}", stderr) from exc
        proposals.append(NewAnnotation(ann_type, tuple(spans), attrs))
    return StageOutput(new_annotations=proposals), stderr


def invoke_external(
    descriptor: ModuleDescriptor,
    doc: Document,
    params: Optional[Mapping] = None,
    *,
    timeout: float = DEFAULT_TIMEOUT,
):
    """Run one external module over a document and apply its output.

    Returns the applied annotations. The output is validated in full before
    anything is added, so a protocol or span error leaves the document
    untouched.
    """
    if descriptor.coupling != EXTERNAL:
        raise PipelineError(f"module {descriptor.name!r} is not externally coupled")
    resolved = descriptor.resolve_params(dict(params or {}))
    before = doc.next_id
    output, _ = _exchange(descriptor, doc, resolved, timeout)
    apply_output(doc, output)
    return [doc.get(ann_id) for ann_id in range(before, doc.next_id)]


class PipelineEngine:
    """Executes pipelines against a registry and a table of in-process impls."""

    def __init__(
        self,
        registry: Registry,
        impls: Optional[Mapping[str, ModuleImpl]] = None,
        *,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.registry = registry
        self.impls = dict(impls or {})
        self.timeout = timeout

    def plan(self, pipeline: Pipeline) -> PlanReport:
        """Check that every stage's requirements are met by earlier stages.

        The available-type map is a static approximation: a type counts as
        present once any earlier stage promises it, and its attribute pool is
        the union of promised attributes. Stages are never reordered. A
        stage promising nothing new draws a redundancy warning.
        """
        available: dict[str, set[str]] = {name: set() for name in pipeline.inputs}
        problems: list[PlanProblem] = []
        warnings: list[str] = []
        for index, stage in enumerate(pipeline.stages):
            descriptor = self.registry.get(stage.module)
            descriptor.resolve_params(stage.params)
            for condition in descriptor.pre:
                have = available.get(condition.ann_type)
                if have is None:
                    problems.append(PlanProblem(index, stage.module, condition.ann_type))
                    continue
                missing = tuple(a for a in condition.attributes if a not in have)
                if missing:
                    problems.append(
                        PlanProblem(index, stage.module, condition.ann_type, missing)
                    )
            redundant = all(
                condition.ann_type in available
                and set(condition.attributes) <= available[condition.ann_type]
                for condition in descriptor.post
            )
            if redundant:
                warnings.append(
                    f"stage {index} ({stage.module}): postconditions already provided by earlier stages"
                )
            for condition in descriptor.post:
                available.setdefault(condition.ann_type, set()).update(condition.attributes)
        return PlanReport(
            pipeline=pipeline.name,
            stages=[stage.module for stage in pipeline.stages],
            problems=problems,
            warnings=warnings,
        )

    def _produce(self, descriptor: ModuleDescriptor, doc: Document, params: dict):
        if descriptor.coupling == EXTERNAL:
            return _exchange(descriptor, doc, params, self.timeout)
        impl = self.impls.get(descriptor.name)
        if impl is None:
            raise PipelineError(f"no in-process implementation registered for {descriptor.name!r}")
        return impl(doc, params), ""

    def _run_stage(self, stage: Stage, doc: Document, skip_satisfied: bool) -> StageRecord:
        started = time.perf_counter()
        record = StageRecord(module=stage.module, params={}, status=STATUS_OK)
        try:
            descriptor = self.registry.get(stage.module)
            params = descriptor.resolve_params(stage.params)
            record.params = params
            unmet = [c for c in descriptor.pre if not c.satisfied_by(doc)]
            if unmet:
                need = ", ".join(
                    c.ann_type + (f"{{{', '.join(c.attributes)}}}" if c.attributes else "")
                    for c in unmet
                )
                record.status = STATUS_FAILED
                record.message = f"precondition not satisfied: need {need}"
            elif skip_satisfied and all(c.satisfied_by(doc) for c in descriptor.post):
                record.status = STATUS_SKIPPED
                record.message = "postconditions already satisfied"
            else:
                output, stderr = self._produce(descriptor, doc, params)
                record.stderr = stderr
                record.added, record.attributes_added = apply_output(doc, output)
        except WireProtocolError as exc:
            record.status = STATUS_FAILED
            record.message = str(exc)
            record.stderr = exc.stderr
        except StandoffError as exc:
            record.status = STATUS_FAILED
            record.message = str(exc)
        except Exception as exc:  # implementation bug in an in-process module
            record.status = STATUS_FAILED
            record.message = f"{type(exc).__name__}: {exc}"
        record.seconds = time.perf_counter() - started
        return record

    def run(self, pipeline: Pipeline, doc: Document, *, skip_satisfied: bool = False) -> RunReport:
        """Execute stages in order; a failure halts the run.

        Preconditions are re-checked against the live document before each
        stage, so a document that already carries the needed types can run a
        pipeline that would not plan from empty.
        """
        records: list[StageRecord] = []
        halted = False
        for stage in pipeline.stages:
            if halted:
                records.append(
                    StageRecord(
                        module=stage.module,
                        params={},
                        status=STATUS_SKIPPED,
                        message="not run: an earlier stage failed",
                    )
                )
                continue
            record = self._run_stage(stage, doc, skip_satisfied)
            records.append(record)
            if record.status == STATUS_FAILED:
                halted = True
        return RunReport(pipeline=pipeline.name, doc_id=doc.doc_id, stages=records)

    def _run_one(self, pipeline, collection, doc_id, skip_satisfied) -> RunReport:
        try:
            doc = collection.load_document(doc_id)
        except (CollectionError, StandoffError, OSError) as exc:
            return RunReport(pipeline.name, doc_id, stages=[], error=f"cannot load document: {exc}")
        report = self.run(pipeline, doc, skip_satisfied=skip_satisfied)
        if report.ok:
            try:
                collection.save_document(doc)
            except (CollectionError, OSError) as exc:
                report.error = f"run succeeded but save failed: {exc}"
        return report

    def run_collection(
        self,
        pipeline: Pipeline,
        collection: Collection,
        *,
        doc_ids: Optional[Sequence[str]] = None,
        skip_satisfied: bool = False,
        workers: int = 1,
    ) -> list[RunReport]:
        """Run over every document (or the given ids), one report each.

        Documents are independent: failures are isolated, and only documents
        whose run succeeded are saved. With ``workers`` > 1 documents run
        concurrently, but reports still come back in document order.
        """
        ids = list(doc_ids) if doc_ids is not None else collection.document_ids()
        if workers <= 1 or len(ids) <= 1:
            return [self._run_one(pipeline, collection, doc_id, skip_satisfied) for doc_id in ids]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(self._run_one, pipeline, collection, doc_id, skip_satisfied)
                for doc_id in ids
            ]
            return [future.result() for future in futures]
