"""Stand-off annotation toolkit.

Documents hold immutable UTF-8 text; analysis results live beside the text
as typed, attribute-bearing annotations over byte-offset spans. Collections
persist documents and annotations as plain JSON files. Processing modules
declare what they need and what they produce; the engine validates and runs
them in order, in-process or as subprocesses, and a small HTTP service plus
CLI expose the whole thing.
"""

from .errors import (
    AnnotationError,
    CollectionError,
    DescriptorError,
    MarkupError,
    PipelineError,
    SpanError,
    StandoffError,
    WireProtocolError,
)
from .store import (
    KIND_INT,
    KIND_REF,
    KIND_TEXT,
    AnnRef,
    Annotation,
    AnnotationTypeDecl,
    Document,
    SourceRef,
    Span,
    Violation,
    attr_kind,
    span_overlaps_window,
    validate_document,
)
from .collection import Collection, create_collection, open_collection
from .markup import (
    ImportReport,
    MarkupElement,
    RoundtripResult,
    export_markup,
    import_markup,
    parse_markup,
    roundtrip_check,
)
from .registry import (
    CompatGraph,
    Condition,
    Edge,
    ModuleDescriptor,
    Parameter,
    Registry,
    build_compat_graph,
    builtin_registry,
    load_descriptor,
    modules_runnable,
    serialize_descriptor,
)
from .pipeline import (
    NewAnnotation,
    Pipeline,
    PipelineEngine,
    PlanReport,
    RunReport,
    Stage,
    StageOutput,
    StageRecord,
    invoke_external,
    load_pipeline,
    serialize_pipeline,
)
from .builtin import (
    Gazetteer,
    Lexicon,
    external_tokenizer_descriptor,
    match_names,
    split_sentences,
    standard_engine,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AnnRef",
    "Annotation",
    "AnnotationError",
    "AnnotationTypeDecl",
    "Collection",
    "CollectionError",
    "CompatGraph",
    "Condition",
    "DescriptorError",
    "Document",
    "Edge",
    "Gazetteer",
    "ImportReport",
    "KIND_INT",
    "KIND_REF",
    "KIND_TEXT",
    "Lexicon",
    "MarkupElement",
    "MarkupError",
    "ModuleDescriptor",
    "NewAnnotation",
    "Parameter",
    "Pipeline",
    "PipelineEngine",
    "PipelineError",
    "PlanReport",
    "Registry",
    "RoundtripResult",
    "RunReport",
    "SourceRef",
    "Span",
    "SpanError",
    "Stage",
    "StageOutput",
    "StageRecord",
    "StandoffError",
    "Violation",
    "WireProtocolError",
    "attr_kind",
    "build_compat_graph",
    "builtin_registry",
    "create_collection",
    "export_markup",
    "external_tokenizer_descriptor",
    "import_markup",
    "invoke_external",
    "load_descriptor",
    "load_pipeline",
    "match_names",
    "modules_runnable",
    "open_collection",
    "parse_markup",
    "roundtrip_check",
    "serialize_descriptor",
    "serialize_pipeline",
    "span_overlaps_window",
    "split_sentences",
    "standard_engine",
    "tokenize",
    "validate_document",
]
