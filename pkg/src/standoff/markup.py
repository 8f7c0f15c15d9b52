"""Conversion between inline markup and stand-off annotations.

The accepted dialect is a minimal, fully explicit normal form: every element
has an open and a close tag (or is self-closing), attribute values are
double-quoted, and only the three character entities ``&lt; &gt; &amp;`` are
recognized. Anything smelling of minimization (unquoted or valueless
attributes, ``</>``, declarations, processing instructions) is rejected with
an unsupported-feature error carrying the byte position.

Importing strips the tags: the document text is the concatenation of the
text runs, entities decoded, and every element becomes one annotation whose
span covers its content in byte offsets of the decoded text. Exporting is
the inverse. Structures that do not fit a tree (multi-span annotations,
crossing spans) are carried through paired empty marker tags

    <TYPE-start id="N" .../>  ...  <TYPE-end id="N"/>

one pair per span, all pairs of one annotation sharing the ``id`` attribute.
The importer reassembles such markers into multi-span annotations, so even
graph-shaped data survives a round trip.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import MarkupError
from .store import AnnRef, Document, Span

logger = logging.getLogger(__name__)

NEST_ONLY = "nest-only"
MILESTONE = "milestone"

_ENTITIES = ((b"&lt;", b"<"), (b"&gt;", b">"), (b"&amp;", b"&"))
_NAME_START = frozenset(b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_REST = _NAME_START | frozenset(b"0123456789.-")


@dataclass
class MarkupElement:
    """One parsed element: tag name, attributes, ordered children.

    Children are nested elements and text runs (already entity-decoded).
    """

    name: str
    attributes: dict[str, str] = field(default_factory=dict)
    children: list[Union["MarkupElement", str]] = field(default_factory=list)

    def text_content(self) -> str:
        parts = []
        for child in self.children:
            parts.append(child if isinstance(child, str) else child.text_content())
        return "".join(parts)


@dataclass
class ImportReport:
    """What an import produced: the raw text, per-tag counts, warnings."""

    raw_text: str
    created: dict[str, int]
    warnings: list[str]


@dataclass
class RoundtripResult:
    """Outcome of exporting a freshly imported document.

    ``byte_equal`` is strict byte identity between input and re-export;
    ``canonical_equal`` ignores byte-level presentation (attribute order,
    element ordering at one offset) and compares text plus the annotation
    structure the two forms denote.
    """

    byte_equal: bool
    canonical_equal: bool

    def __bool__(self) -> bool:
        return self.byte_equal


@dataclass
class _Elem:
    # parse intermediary: offsets are byte offsets into the decoded text
    name: str
    attributes: dict[str, str]
    start: int
    end: int
    empty: bool
    order: int


class _Parser:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.out = bytearray()
        self.elements: list[_Elem] = []
        # stack entries: (_Elem, MarkupElement)
        self.stack: list[tuple[_Elem, MarkupElement]] = []
        self.top_level: list[Union[MarkupElement, str]] = []

    def fail(self, message: str, position: Optional[int] = None):
        raise MarkupError(message, self.pos if position is None else position)

    def _emit_text(self, decoded: bytes) -> None:
        self.out += decoded
        if decoded:
            text = decoded.decode("utf-8", errors="surrogateescape")
            children = self.stack[-1][1].children if self.stack else self.top_level
            if children and isinstance(children[-1], str):
                children[-1] += text
            else:
                children.append(text)

    def _decode_entities(self, segment: bytes, base: int) -> bytes:
        out = bytearray()
        i = 0
        while True:
            j = segment.find(b"&", i)
            if j == -1:
                out += segment[i:]
                return bytes(out)
            out += segment[i:j]
            for entity, char in _ENTITIES:
                if segment.startswith(entity, j):
                    out += char
                    i = j + len(entity)
                    break
            else:
                self.fail("unknown entity (only &lt; &gt; &amp; are recognized)", base + j)

    def _scan_name(self) -> str:
        data, start = self.data, self.pos
        if self.pos >= len(data) or data[self.pos] not in _NAME_START:
            return ""
        self.pos += 1
        while self.pos < len(data) and data[self.pos] in _NAME_REST:
            self.pos += 1
        return data[start : self.pos].decode("ascii")

    def _skip_ws(self) -> None:
        while self.pos < len(self.data) and self.data[self.pos] in b" \t\r\n":
            self.pos += 1

    def _scan_attributes(self) -> dict[str, str]:
        attrs: dict[str, str] = {}
        while True:
            self._skip_ws()
            if self.pos >= len(self.data):
                self.fail("unterminated tag")
            if self.data[self.pos] in b"/>":
                return attrs
            at = self.pos
            name = self._scan_name()
            if not name:
                self.fail("expected attribute name", at)
            self._skip_ws()
            if self.pos >= len(self.data) or self.data[self.pos] != ord("="):
                self.fail(
                    f"attribute {name!r} has no value; minimized attributes are not supported", at
                )
            self.pos += 1
            self._skip_ws()
            if self.pos >= len(self.data) or self.data[self.pos] != ord('"'):
                self.fail(f"attribute {name!r} value must be double-quoted", self.pos)
            self.pos += 1
            close = self.data.find(b'"', self.pos)
            if close == -1:
                self.fail(f"unterminated value of attribute {name!r}", at)
            raw = self.data[self.pos : close]
            if b"<" in raw:
                self.fail(f"raw '<' in value of attribute {name!r}", self.pos + raw.find(b"<"))
            if name in attrs:
                self.fail(f"duplicate attribute {name!r}", at)
            attrs[name] = self._decode_entities(raw, self.pos).decode("utf-8", errors="surrogateescape")
            self.pos = close + 1

    def _open(self, name: str, attrs: dict[str, str], empty: bool) -> None:
        elem = _Elem(name, attrs, len(self.out), len(self.out), empty, len(self.elements))
        node = MarkupElement(name, attrs)
        self.elements.append(elem)
        children = self.stack[-1][1].children if self.stack else self.top_level
        children.append(node)
        if not empty:
            self.stack.append((elem, node))

    def _close(self, name: str, at: int) -> None:
        if not self.stack:
            self.fail(f"close tag </{name}> without matching open tag", at)
        elem, _ = self.stack.pop()
        if elem.name != name:
            self.fail(f"mismatched close tag: expected </{elem.name}>, found </{name}>", at)
        elem.end = len(self.out)

    def _parse_tag(self) -> None:
        at = self.pos
        self.pos += 1  # past '<'
        if self.pos >= len(self.data):
            self.fail("unterminated tag", at)
        head = self.data[self.pos]
        if head in b"!?":
            self.fail("declarations and processing instructions are not supported", at)
        if head == ord("/"):
            self.pos += 1
            name = self._scan_name()
            if not name:
                self.fail("empty close tag is not supported", at)
            self._skip_ws()
            if self.pos >= len(self.data) or self.data[self.pos] != ord(">"):
                self.fail("malformed close tag", at)
            self.pos += 1
            self._close(name, at)
            return
        name = self._scan_name()
        if not name:
            self.fail("malformed tag", at)
        attrs = self._scan_attributes()
        if self.data.startswith(b"/>", self.pos):
            self.pos += 2
            self._open(name, attrs, empty=True)
        elif self.data[self.pos] == ord(">"):
            self.pos += 1
            self._open(name, attrs, empty=False)
        else:
            self.fail("malformed tag", at)

    def parse(self) -> None:
        data = self.data
        while self.pos < len(data):
            lt = data.find(b"<", self.pos)
            if lt == -1:
                self._emit_text(self._decode_entities(data[self.pos :], self.pos))
                self.pos = len(data)
                break
            if lt > self.pos:
                self._emit_text(self._decode_entities(data[self.pos : lt], self.pos))
            self.pos = lt
            self._parse_tag()
        if self.stack:
            self.fail(f"unclosed element <{self.stack[-1][0].name}>", len(data))


def _as_bytes(marked_up: Union[bytes, str]) -> bytes:
    return marked_up.encode("utf-8") if isinstance(marked_up, str) else bytes(marked_up)


def _marker_base(name: str) -> Optional[tuple[str, bool]]:
    # (annotation type, is_start) if the element name follows the marker convention
    if name.endswith("-start") and len(name) > 6:
        return name[:-6], True
    if name.endswith("-end") and len(name) > 4:
        return name[:-4], False
    return None


def _reconstitute(elements: list[_Elem], warnings: list[str]):
    """Fold marker-pair elements back into multi-span annotation specs.

    Returns (specs, consumed) where each spec is (order, name, attrs,
    spans) and consumed is the set of element orders absorbed into marker
    groups. Malformed groups are left alone as ordinary annotations, with a
    warning.
    """
    groups: dict[tuple[str, str], list[tuple[_Elem, bool]]] = {}
    for elem in elements:
        base = _marker_base(elem.name)
        if base is None or not elem.empty or "id" not in elem.attributes:
            continue
        groups.setdefault((base[0], elem.attributes["id"]), []).append((elem, base[1]))

    specs = []
    consumed: set[int] = set()
    for (ann_type, marker_id), members in groups.items():
        spans: list[Span] = []
        ok = len(members) % 2 == 0 and len(members) > 0
        for index, (elem, is_start) in enumerate(members):
            if is_start != (index % 2 == 0):
                ok = False
                break
            if is_start:
                spans.append(Span(elem.start, elem.start))
            else:
                spans[-1] = Span(spans[-1].start, elem.start)
        if ok:
            ordered = sorted(spans)
            for prev, cur in zip(ordered, ordered[1:]):
                if prev.start < cur.end and cur.start < prev.end:
                    ok = False
        if not ok:
            warnings.append(
                f"markers for {ann_type!r} id={marker_id!r} do not pair up; kept as plain elements"
            )
            continue
        first = members[0][0]
        attrs = {k: v for k, v in first.attributes.items() if k != "id"}
        specs.append((first.order, ann_type, attrs, spans))
        consumed.update(elem.order for elem, _ in members)
    return specs, consumed


def import_markup(marked_up: Union[bytes, str], doc_id: str) -> tuple[Document, ImportReport]:
    """Parse normal-form markup into a document plus stand-off annotations.

    The document text is the concatenated text content; each element becomes
    one annotation (type = tag name, attributes as text values) spanning its
    content. Ids follow document order, i.e. the order of open tags.
    """
    parser = _Parser(_as_bytes(marked_up))
    parser.parse()
    try:
        text = bytes(parser.out).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MarkupError(f"text content is not valid UTF-8: {exc}") from exc

    warnings: list[str] = []
    marker_specs, consumed = _reconstitute(parser.elements, warnings)
    specs = [
        (elem.order, elem.name, dict(elem.attributes), [Span(elem.start, elem.end)])
        for elem in parser.elements
        if elem.order not in consumed
    ]
    specs.extend(marker_specs)
    specs.sort(key=lambda spec: spec[0])

    doc = Document(doc_id, text)
    created: dict[str, int] = {}
    for _, name, attrs, spans in specs:
        doc.add_annotation(name, spans, attrs)
        created[name] = created.get(name, 0) + 1
    return doc, ImportReport(raw_text=text, created=created, warnings=warnings)


def parse_markup(marked_up: Union[bytes, str]) -> list[Union[MarkupElement, str]]:
    """Parse normal-form markup into a tree of elements and text runs.

    Returns the top-level sequence; no marker reconstitution is applied.
    """
    parser = _Parser(_as_bytes(marked_up))
    parser.parse()
    return parser.top_level


def _encode_text(data: bytes) -> bytes:
    return data.replace(b"&", b"&amp;").replace(b"<", b"&lt;").replace(b">", b"&gt;")


def _name_bytes(name: str, what: str) -> bytes:
    encoded = name.encode("ascii", errors="replace")
    if not encoded or encoded[0] not in _NAME_START or any(c not in _NAME_REST for c in encoded[1:]):
        raise MarkupError(f"{what} {name!r} is not a valid markup name")
    return encoded


def _render_attrs(
    attributes: dict, ann_id: Optional[int] = None, reserved: frozenset = frozenset()
) -> bytes:
    parts = bytearray()
    for name in sorted(attributes):
        value = attributes[name]
        if name in reserved:
            logger.warning(
                "annotation %s: attribute %r collides with a marker attribute; dropped",
                ann_id,
                name,
            )
            continue
        if isinstance(value, AnnRef):
            logger.warning(
                "annotation %s: reference attribute %r is not representable in markup; dropped",
                ann_id,
                name,
            )
            continue
        text = value if isinstance(value, str) else str(value)
        if '"' in text:
            raise MarkupError(
                f"attribute {name!r} contains a double quote, which the markup dialect cannot encode"
            )
        encoded = _encode_text(text.encode("utf-8"))
        parts += b' %s="%s"' % (_name_bytes(name, "attribute name"), encoded)
    return bytes(parts)


def _contains(outer: Span, inner: Span) -> bool:
    return outer.start <= inner.start and inner.end <= outer.end


def _crossing_pairs(annotations) -> list[tuple[int, int]]:
    pairs = []
    for i, a in enumerate(annotations):
        sa = a.spans[0]
        for b in annotations[i + 1 :]:
            sb = b.spans[0]
            if sa.start < sb.end and sb.start < sa.end:
                if not (_contains(sa, sb) or _contains(sb, sa)):
                    pairs.append((a.id, b.id))
    return pairs


def export_markup(doc: Document, types: Iterable[str], overlap_mode: str = NEST_ONLY) -> bytes:
    """Serialize selected annotation types over the document text as markup.

    ``nest-only`` requires the selection to form a proper tree of
    single-span annotations and fails otherwise, naming the offenders.
    ``milestone`` additionally emits multi-span and crossing annotations as
    paired empty marker tags. The text content of the output is
    byte-identical to the document text in both modes.
    """
    if overlap_mode not in (NEST_ONLY, MILESTONE):
        raise ValueError(f"unknown overlap mode {overlap_mode!r}")
    wanted = set(types)
    selected = [ann for ann in doc.get_annotations() if ann.ann_type in wanted]

    multi = [ann for ann in selected if len(ann.spans) > 1]
    single = [ann for ann in selected if len(ann.spans) == 1]
    crossing = _crossing_pairs(single)

    if overlap_mode == NEST_ONLY:
        if multi:
            ids = ", ".join(str(ann.id) for ann in multi)
            raise MarkupError(
                f"multi-span annotations ({ids}) cannot nest; use milestone mode"
            )
        if crossing:
            listed = ", ".join(f"({a}, {b})" for a, b in crossing[:20])
            raise MarkupError(f"selection does not nest; crossing annotation pairs: {listed}")
        tree_anns, milestone_anns = single, []
    else:
        crossing_ids = {ann_id for pair in crossing for ann_id in pair}
        tree_anns = [ann for ann in single if ann.id not in crossing_ids]
        milestone_anns = multi + [ann for ann in single if ann.id in crossing_ids]
        milestone_anns.sort(key=lambda ann: ann.id)

    # Event groups at one offset, in output order: element closes, milestone
    # ends, empty elements, milestone starts, element opens. Key fields after
    # the group keep nesting well-formed: opens widest-first, closes
    # innermost-first, ties broken by id.
    events: list[tuple[int, int, int, int, int, bytes]] = []
    for ann in tree_anns:
        span = ann.spans[0]
        name = _name_bytes(ann.ann_type, "annotation type")
        attrs = _render_attrs(ann.attributes, ann.id)
        if span.empty:
            events.append((span.start, 2, 0, ann.id, 0, b"<%s%s></%s>" % (name, attrs, name)))
        else:
            events.append((span.start, 4, -span.end, ann.id, 0, b"<%s%s>" % (name, attrs)))
            events.append((span.end, 0, -span.start, -ann.id, 0, b"</%s>" % name))
    for ann in milestone_anns:
        name = _name_bytes(ann.ann_type, "annotation type")
        id_attr = b' id="%d"' % ann.id
        for index, span in enumerate(ann.spans):
            # "id" is the pairing key on markers; a clashing payload attribute
            # cannot be carried and is dropped with a warning.
            extra = (
                _render_attrs(ann.attributes, ann.id, reserved=frozenset(("id",)))
                if index == 0
                else b""
            )
            start_tag = b"<%s-start%s%s/>" % (name, id_attr, extra)
            end_tag = b"<%s-end%s/>" % (name, id_attr)
            if span.empty:
                events.append((span.start, 2, 1, ann.id, index, start_tag + end_tag))
            else:
                events.append((span.start, 3, ann.id, index, 0, start_tag))
                events.append((span.end, 1, ann.id, index, 0, end_tag))
    events.sort(key=lambda event: event[:5])

    data = doc.text_bytes
    out = bytearray()
    pos = 0
    for offset, _, _, _, _, payload in events:
        out += _encode_text(data[pos:offset])
        out += payload
        pos = offset
    out += _encode_text(data[pos:])
    return bytes(out)


def _structure(doc: Document):
    return sorted(
        (ann.ann_type, ann.spans, tuple(sorted(ann.attributes.items())))
        for ann in doc.get_annotations()
    )


def roundtrip_check(marked_up: Union[bytes, str], overlap_mode: str = NEST_ONLY) -> RoundtripResult:
    """Import markup, export it again, and compare the two forms.

    Byte equality holds when the input is already in canonical form
    (attributes in sorted name order, canonical tag placement); canonical
    equality holds whenever both forms denote the same text and annotation
    structure. Import and export errors propagate.
    """
    data = _as_bytes(marked_up)
    doc, _ = import_markup(data, "roundtrip")
    exported = export_markup(doc, doc.annotation_types(), overlap_mode)
    redone, _ = import_markup(exported, "roundtrip")
    return RoundtripResult(
        byte_equal=exported == data,
        canonical_equal=doc.text == redone.text and _structure(doc) == _structure(redone),
    )
