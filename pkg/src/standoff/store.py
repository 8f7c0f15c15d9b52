"""Per-document store of stand-off annotations.

A :class:`Document` holds an immutable UTF-8 text plus a set of typed,
multi-span, attribute-bearing :class:`Annotation` records that point into the
text by byte offsets. The store is the single channel through which processing
modules read and write analysis results: the text itself never changes.

Offsets are byte offsets into the UTF-8 encoding of the text, end-exclusive.
A span may be empty (``start == end``) and then acts as an insertion-point
marker at that byte position.
"""

from __future__ import annotations

import hashlib
from bisect import insort
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Union

from .errors import AnnotationError, SpanError


class Span(NamedTuple):
    """Half-open byte interval ``[start, end)`` into a document's text."""

    start: int
    end: int

    @property
    def empty(self) -> bool:
        return self.start == self.end


def span_overlaps_window(span: Span, window: Span) -> bool:
    """Decide whether an annotation span is selected by a query window.

    Non-empty intervals use the standard half-open intersection test. An
    empty annotation span at position ``p`` is selected by a window that
    contains ``p`` (``window.start <= p < window.end``) or by an empty window
    sitting exactly at ``p``. An empty window selects only empty spans at its
    position; it never selects a non-empty span, even one containing the
    position.
    """
    if span.empty:
        if window.empty:
            return span.start == window.start
        return window.start <= span.start < window.end
    if window.empty:
        return False
    return span.start < window.end and window.start < span.end


@dataclass(frozen=True)
class AnnRef:
    """Attribute value that points at another annotation in the same document."""

    target: int

    def __post_init__(self) -> None:
        if not isinstance(self.target, int) or isinstance(self.target, bool) or self.target < 1:
            raise AnnotationError(f"annotation reference must be a positive id, got {self.target!r}")


#: An attribute value is a text string, an integer, or a reference to another
#: annotation in the same document.
AttrValue = Union[str, int, AnnRef]

KIND_TEXT = "text"
KIND_INT = "int"
KIND_REF = "ref"


def attr_kind(value: AttrValue) -> str:
    """Return the value kind tag ("text" | "int" | "ref") for a value."""
    if isinstance(value, str):
        return KIND_TEXT
    if isinstance(value, AnnRef):
        return KIND_REF
    if isinstance(value, bool):  # bool is an int subclass; not a legal kind
        raise AnnotationError("boolean is not a valid attribute value")
    if isinstance(value, int):
        return KIND_INT
    raise AnnotationError(f"unsupported attribute value type: {type(value).__name__}")


def _check_attributes(attributes: dict[str, AttrValue]) -> None:
    for name, value in attributes.items():
        if not isinstance(name, str) or not name:
            raise AnnotationError(f"attribute name must be a non-empty string, got {name!r}")
        attr_kind(value)


@dataclass
class Annotation:
    """A typed record over one or more spans of a document.

    Treated as immutable by convention: ids, types and spans never change
    once stored. Attribute maps may gain entries (through
    :meth:`Document.add_attribute`) but never lose or change them.
    """

    id: int
    ann_type: str
    spans: tuple[Span, ...]
    attributes: dict[str, AttrValue] = field(default_factory=dict)

    @property
    def start(self) -> int:
        """Byte offset of the first span."""
        return self.spans[0].start

    @property
    def end(self) -> int:
        """Byte offset where the last span ends."""
        return self.spans[-1].end


@dataclass(frozen=True)
class SourceRef:
    """Where a document's bytes came from.

    ``inline`` sources are owned by the collection that stores them;
    ``by-reference`` sources are someone else's file and are never written,
    only read and digest-checked.
    """

    mode: str  # "inline" | "by-reference"
    path: Optional[str] = None
    digest: str = ""

    def __post_init__(self) -> None:
        if self.mode not in ("inline", "by-reference"):
            raise ValueError(f"bad source mode: {self.mode!r}")
        if self.mode == "by-reference" and not self.path:
            raise ValueError("by-reference source needs a path")


@dataclass(frozen=True)
class AnnotationTypeDecl:
    """Declares the attributes annotations of one type must carry.

    ``required_attributes`` maps attribute name to a value kind
    ("text" | "int" | "ref"). Declarations are advisory: the store accepts
    undeclared types freely, and conformance is only checked when
    :func:`validate_document` is called.
    """

    ann_type: str
    required_attributes: dict[str, str] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self) -> None:
        if not self.ann_type:
            raise ValueError("annotation type name must be non-empty")
        for name, kind in self.required_attributes.items():
            if not name:
                raise ValueError("declared attribute name must be non-empty")
            if kind not in (KIND_TEXT, KIND_INT, KIND_REF):
                raise ValueError(f"bad value kind {kind!r} for attribute {name!r}")

    def __hash__(self) -> int:
        return hash((self.ann_type, tuple(sorted(self.required_attributes.items()))))


@dataclass(frozen=True)
class Violation:
    """One conformance problem found by :func:`validate_document`.

    ``kind`` is one of ``missing-attribute``, ``wrong-kind``,
    ``dangling-reference``. ``ann_id`` is ``None`` when the problem sits on a
    document attribute rather than an annotation.
    """

    ann_id: Optional[int]
    kind: str
    attribute: Optional[str]
    detail: str


class Document:
    """An immutable text plus its annotation set.

    The text bytes are fixed at construction; every mutating operation only
    touches the annotation set. Annotation ids are allocated from a counter
    that never goes backwards, so an id is never reused within a document,
    even after removal.

    A document is a single-writer unit: at most one mutator at a time, any
    number of readers between mutations. Independent documents can be
    processed in parallel without coordination.
    """

    def __init__(
        self,
        doc_id: str,
        text: str,
        *,
        attributes: Optional[dict[str, AttrValue]] = None,
        source: Optional[SourceRef] = None,
    ):
        if not doc_id:
            raise ValueError("doc_id must be non-empty")
        self.doc_id = doc_id
        self._text = text
        self._data = text.encode("utf-8")
        self._digest = hashlib.sha256(self._data).hexdigest()
        self.attributes: dict[str, AttrValue] = dict(attributes or {})
        _check_attributes(self.attributes)
        self.source = source
        self.stale_digest = False
        self.next_id = 1
        self._by_id: dict[int, Annotation] = {}
        # kept sorted by (first span start, id); this is the query order
        self._order: list[tuple[int, int, Annotation]] = []

    # -- text access ---------------------------------------------------

    @property
    def text(self) -> str:
        return self._text

    @property
    def text_bytes(self) -> bytes:
        return self._data

    @property
    def digest(self) -> str:
        """SHA-256 hex digest of the text bytes."""
        return self._digest

    def __len__(self) -> int:
        """Text length in bytes (the unit all spans are measured in)."""
        return len(self._data)

    def span_bytes(self, span: Span) -> bytes:
        return self._data[span.start : span.end]

    def span_text(self, span: Span) -> str:
        """Decode the bytes under ``span``.

        Raises ``UnicodeDecodeError`` if the span splits a multi-byte
        character; spans produced by the built-in modules always fall on
        character boundaries.
        """
        return self.span_bytes(span).decode("utf-8")

    # -- mutation ------------------------------------------------------

    def check_spans(self, spans: Iterable[tuple[int, int]]) -> tuple[Span, ...]:
        """Validate a span list against this document without adding anything.

        Returns the spans sorted into canonical order. Raises ``SpanError``
        for malformed, out-of-bounds, or mutually overlapping spans, and
        ``AnnotationError`` for an empty list.
        """
        checked = []
        for raw in spans:
            span = Span(*raw)
            if span.start < 0 or span.start > span.end:
                raise SpanError(f"malformed span {span}")
            if span.end > len(self._data):
                raise SpanError(f"span {span} exceeds text length {len(self._data)}")
            checked.append(span)
        if not checked:
            raise AnnotationError("annotation needs at least one span")
        checked.sort()
        for prev, cur in zip(checked, checked[1:]):
            # half-open intervals: empty spans never collide
            if prev.start < cur.end and cur.start < prev.end:
                raise SpanError(f"spans {prev} and {cur} overlap within one annotation")
        return tuple(checked)

    def _check_refs(self, attributes: dict[str, AttrValue]) -> None:
        for name, value in attributes.items():
            if isinstance(value, AnnRef) and value.target not in self._by_id:
                raise AnnotationError(
                    f"attribute {name!r} references annotation {value.target}, which does not exist"
                )

    def add_annotation(
        self,
        ann_type: str,
        spans: Iterable[tuple[int, int]],
        attributes: Optional[dict[str, AttrValue]] = None,
    ) -> int:
        """Store a new annotation and return its freshly allocated id.

        Spans are sorted, then verified to be in bounds and pairwise
        non-overlapping. Annotation-reference attribute values must name an
        id that already exists in this document.
        """
        if not ann_type:
            raise AnnotationError("annotation type must be non-empty")
        attrs = dict(attributes or {})
        _check_attributes(attrs)
        self._check_refs(attrs)
        checked = self.check_spans(spans)
        ann = Annotation(self.next_id, ann_type, checked, attrs)
        self._by_id[ann.id] = ann
        insort(self._order, (ann.start, ann.id, ann))
        self.next_id += 1
        return ann.id

    def remove_annotation(self, ann_id: int) -> bool:
        """Drop an annotation. Returns False if the id is absent.

        The id is never reallocated. Annotations whose attributes reference
        the removed id become dangling; :func:`validate_document` reports
        them, removal does not cascade.
        """
        ann = self._by_id.pop(ann_id, None)
        if ann is None:
            return False
        self._order.remove((ann.start, ann.id, ann))
        return True

    def add_attribute(self, ann_id: int, name: str, value: AttrValue) -> None:
        """Add one attribute entry to an existing annotation.

        This is the only sanctioned mutation of a stored annotation:
        attribute maps may gain entries, never lose or change them. Setting
        a name to the value it already has is a no-op; setting it to a
        different value is an error.
        """
        ann = self._by_id.get(ann_id)
        if ann is None:
            raise AnnotationError(f"no annotation with id {ann_id}")
        _check_attributes({name: value})
        self._check_refs({name: value})
        if name in ann.attributes:
            if ann.attributes[name] != value:
                raise AnnotationError(
                    f"attribute {name!r} of annotation {ann_id} is already "
                    f"{ann.attributes[name]!r}; attributes may be added, not changed"
                )
            return
        ann.attributes[name] = value

    def _restore_annotation(
        self,
        ann_id: int,
        ann_type: str,
        spans: Iterable[tuple[int, int]],
        attributes: dict[str, AttrValue],
    ) -> None:
        """Re-insert a persisted annotation under its original id.

        For the persistence layer only. Spans and attribute shapes are
        checked, but annotation references are not: a saved document may
        legitimately contain dangling references (removal never cascades),
        and references may point forward within the file being loaded.
        """
        if ann_id < 1:
            raise AnnotationError(f"annotation id must be positive, got {ann_id}")
        if ann_id in self._by_id:
            raise AnnotationError(f"duplicate annotation id {ann_id}")
        if not ann_type:
            raise AnnotationError("annotation type must be non-empty")
        attrs = dict(attributes)
        _check_attributes(attrs)
        ann = Annotation(ann_id, ann_type, self.check_spans(spans), attrs)
        self._by_id[ann.id] = ann
        insort(self._order, (ann.start, ann.id, ann))
        self.next_id = max(self.next_id, ann_id + 1)

    # -- queries -------------------------------------------------------

    def __contains__(self, ann_id: int) -> bool:
        return ann_id in self._by_id

    def get(self, ann_id: int) -> Optional[Annotation]:
        return self._by_id.get(ann_id)

    def __iter__(self):
        """All annotations in (first span start, id) order."""
        for _, _, ann in self._order:
            yield ann

    def get_annotations(self, ann_type: Optional[str] = None) -> list[Annotation]:
        """Annotations of one type (or all), ordered by (first span start, id)."""
        if ann_type is None:
            return [ann for _, _, ann in self._order]
        return [ann for _, _, ann in self._order if ann.ann_type == ann_type]

    def select_overlapping(
        self, window: tuple[int, int], ann_type: Optional[str] = None
    ) -> list[Annotation]:
        """Annotations with at least one span selected by ``window``.

        Ordering matches :meth:`get_annotations`. The scan walks the
        start-sorted order and stops once no later annotation can reach the
        window: every selected span starts before ``window.end`` (or at the
        window position, for an empty window), and an annotation's first
        span starts no later than any of its spans.
        """
        win = Span(*window)
        if win.start < 0 or win.start > win.end or win.end > len(self._data):
            raise SpanError(f"window {win} out of bounds for text length {len(self._data)}")
        bound = win.end if not win.empty else win.start + 1
        hits = []
        for first_start, _, ann in self._order:
            if first_start >= bound:
                break
            if ann_type is not None and ann.ann_type != ann_type:
                continue
            if any(span_overlaps_window(span, win) for span in ann.spans):
                hits.append(ann)
        return hits

    def annotation_types(self) -> set[str]:
        return {ann.ann_type for ann in self._by_id.values()}

    def has_type(self, ann_type: str) -> bool:
        return any(ann.ann_type == ann_type for ann in self._by_id.values())


def validate_document(doc: Document, decls: Iterable[AnnotationTypeDecl]) -> list[Violation]:
    """Check a document against a set of annotation type declarations.

    Reports, for every annotation whose type is declared, required
    attributes that are missing or carry the wrong value kind. Dangling
    annotation references are reported for all annotations and for document
    attributes, declared or not. An empty list means the document conforms.
    """
    by_type: dict[str, AnnotationTypeDecl] = {}
    for decl in decls:
        by_type[decl.ann_type] = decl

    violations: list[Violation] = []

    def check_refs(ann_id: Optional[int], attributes: dict[str, AttrValue]) -> None:
        for name, value in attributes.items():
            if isinstance(value, AnnRef) and value.target not in doc:
                where = f"annotation {ann_id}" if ann_id is not None else "document"
                violations.append(
                    Violation(
                        ann_id,
                        "dangling-reference",
                        name,
                        f"{where} attribute {name!r} references missing annotation {value.target}",
                    )
                )

    check_refs(None, doc.attributes)
    for ann in doc:
        check_refs(ann.id, ann.attributes)
        decl = by_type.get(ann.ann_type)
        if decl is None:
            continue
        for name, kind in decl.required_attributes.items():
            if name not in ann.attributes:
                violations.append(
                    Violation(
                        ann.id,
                        "missing-attribute",
                        name,
                        f"annotation {ann.id} ({ann.ann_type}) lacks required attribute {name!r}",
                    )
                )
            elif attr_kind(ann.attributes[name]) != kind:
                violations.append(
                    Violation(
                        ann.id,
                        "wrong-kind",
                        name,
                        f"annotation {ann.id} ({ann.ann_type}) attribute {name!r} is "
                        f"{attr_kind(ann.attributes[name])}, declared {kind}",
                    )
                )
    return violations
