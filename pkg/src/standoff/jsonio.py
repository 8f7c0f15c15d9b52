"""JSON encoding of annotations and attribute maps.

One encoding is shared by the on-disk annotation files, the external-module
wire protocol and the HTTP API:

    attribute map:  {name: {"kind": "text"|"int"|"ref", "value": ...}}
    annotation:     {"id": int, "type": str, "spans": [[start, end], ...],
                     "attributes": {...}}

Attribute names are emitted in sorted order so equal in-memory values always
serialize to identical bytes.
"""

from __future__ import annotations

from typing import Any

from .errors import AnnotationError
from .store import Annotation, AnnRef, AttrValue, Span, attr_kind


def encode_attrs(attributes: dict[str, AttrValue]) -> dict[str, Any]:
    out = {}
    for name in sorted(attributes):
        value = attributes[name]
        kind = attr_kind(value)
        out[name] = {"kind": kind, "value": value.target if isinstance(value, AnnRef) else value}
    return out


def decode_attrs(obj: Any) -> dict[str, AttrValue]:
    if not isinstance(obj, dict):
        raise AnnotationError(f"attribute map must be an object, got {type(obj).__name__}")
    attrs: dict[str, AttrValue] = {}
    for name, entry in obj.items():
        if not isinstance(entry, dict) or "kind" not in entry or "value" not in entry:
            raise AnnotationError(f"attribute {name!r} must be {{kind, value}}")
        kind, value = entry["kind"], entry["value"]
        if kind == "text":
            if not isinstance(value, str):
                raise AnnotationError(f"attribute {name!r}: text value must be a string")
            attrs[name] = value
        elif kind == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                raise AnnotationError(f"attribute {name!r}: int value must be an integer")
            attrs[name] = value
        elif kind == "ref":
            attrs[name] = AnnRef(value)
        else:
            raise AnnotationError(f"attribute {name!r}: unknown kind {kind!r}")
    return attrs


def encode_annotation(ann: Annotation) -> dict[str, Any]:
    return {
        "id": ann.id,
        "type": ann.ann_type,
        "spans": [[span.start, span.end] for span in ann.spans],
        "attributes": encode_attrs(ann.attributes),
    }


def decode_spans(obj: Any) -> list[Span]:
    if not isinstance(obj, list):
        raise AnnotationError("spans must be a list")
    spans = []
    for raw in obj:
        if (
            not isinstance(raw, (list, tuple))
            or len(raw) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw)
        ):
            raise AnnotationError(f"bad span {raw!r}: expected [start, end]")
        spans.append(Span(raw[0], raw[1]))
    return spans
