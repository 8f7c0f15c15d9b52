"""Persistent collections of documents with a shared annotation database.

A collection is one directory:

    <root>/manifest.json            name, collection attributes, document index
    <root>/sources/<doc_id>.txt     texts of inline documents
    <root>/annotations/<doc_id>.json  one annotation file per document

By-reference documents keep their bytes in the original file, which the
framework never writes; the manifest records the path and a SHA-256 digest
taken at ingest time so tampering is detectable. All files are UTF-8 JSON or
plain UTF-8 text, written atomically (temp file in the same directory, then
rename), so an interrupted save leaves the previous file intact.

Annotation file schema, field order fixed, annotations sorted by id:

    {"doc_id": str, "text_digest": str, "next_id": int,
     "attributes": {...}, "annotations": [{"id", "type", "spans",
     "attributes"}, ...]}

One collection handle per process is assumed; there is no inter-process
locking. Document loading is lazy: ``open`` reads only the manifest, each
document's annotations are read on first :meth:`Collection.load_document`.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Optional, Union

from .errors import CollectionError
from .jsonio import decode_attrs, decode_spans, encode_annotation, encode_attrs
from .store import AttrValue, Document, SourceRef

MANIFEST_NAME = "manifest.json"
_DOC_ID_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9._-]{0,199}$")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


class Collection:
    """A named, persistent set of documents rooted at one directory."""

    def __init__(self, name: str, root: Path):
        self.name = name
        self.root = Path(root)
        self.attributes: dict[str, AttrValue] = {}
        self.doc_index: dict[str, SourceRef] = {}
        #: doc_ids whose source was unreadable when the collection was opened
        self.missing: set[str] = set()
        #: human-readable notes accumulated by open/load (digest mismatches etc.)
        self.warnings: list[str] = []

    # -- lifecycle -----------------------------------------------------

    @classmethod
    def create(cls, name: str, root: Union[str, Path]) -> "Collection":
        """Create an empty collection and write its manifest.

        Fails without touching anything if ``root`` already holds a
        manifest.
        """
        root = Path(root)
        if (root / MANIFEST_NAME).exists():
            raise CollectionError(f"{root} already contains a collection manifest")
        try:
            root.mkdir(parents=True, exist_ok=True)
            (root / "sources").mkdir(exist_ok=True)
            (root / "annotations").mkdir(exist_ok=True)
        except OSError as exc:
            raise CollectionError(f"cannot create collection root {root}: {exc}") from exc
        coll = cls(name, root)
        coll._save_manifest()
        return coll

    @classmethod
    def open(cls, root: Union[str, Path]) -> "Collection":
        """Open an existing collection from its manifest.

        Unreadable sources are flagged in :attr:`missing` (with a warning)
        rather than failing the open; the affected documents error only when
        actually loaded.
        """
        root = Path(root)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.is_file():
            raise CollectionError(f"no collection manifest in {root}")
        try:
            manifest = json.loads(manifest_path.read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise CollectionError(f"cannot read manifest {manifest_path}: {exc}") from exc
        if not isinstance(manifest, dict) or "name" not in manifest:
            raise CollectionError(f"corrupt manifest {manifest_path}")
        coll = cls(str(manifest["name"]), root)
        coll.attributes = decode_attrs(manifest.get("attributes", {}))
        for doc_id, entry in manifest.get("documents", {}).items():
            src = entry.get("source", {})
            ref = SourceRef(src.get("mode", "inline"), src.get("path"), src.get("digest", ""))
            coll.doc_index[doc_id] = ref
            if not os.access(coll._source_path(doc_id, ref), os.R_OK):
                coll.missing.add(doc_id)
                coll.warnings.append(f"source of document {doc_id!r} is missing or unreadable")
        return coll

    def _save_manifest(self) -> None:
        manifest = {
            "name": self.name,
            "attributes": encode_attrs(self.attributes),
            "documents": {
                doc_id: {
                    "source": {
                        "mode": ref.mode,
                        "path": ref.path,
                        "digest": ref.digest,
                    }
                }
                for doc_id, ref in sorted(self.doc_index.items())
            },
        }
        try:
            _atomic_write(self.root / MANIFEST_NAME, _dump_json(manifest))
        except OSError as exc:
            raise CollectionError(f"cannot write manifest under {self.root}: {exc}") from exc

    # -- paths ---------------------------------------------------------

    def _source_path(self, doc_id: str, ref: SourceRef) -> Path:
        if ref.mode == "inline":
            return self.root / "sources" / f"{doc_id}.txt"
        return Path(ref.path)  # type: ignore[arg-type]

    def _annotation_path(self, doc_id: str) -> Path:
        return self.root / "annotations" / f"{doc_id}.json"

    # -- documents -----------------------------------------------------

    def add_document(
        self,
        doc_id: str,
        text: Optional[str] = None,
        *,
        source_path: Optional[Union[str, Path]] = None,
        attributes: Optional[dict[str, AttrValue]] = None,
    ) -> Document:
        """Register a new document from inline text or an external file.

        Exactly one of ``text`` and ``source_path`` must be given.
        By-reference sources are read and digested but never copied; inline
        text is stored under ``sources/``. The annotation file starts empty.
        """
        if doc_id in self.doc_index:
            raise CollectionError(f"document {doc_id!r} already in collection")
        if not _DOC_ID_RE.match(doc_id):
            raise CollectionError(f"doc_id {doc_id!r} is not a safe file name")
        if (text is None) == (source_path is None):
            raise CollectionError("give exactly one of text or source_path")

        if text is not None:
            data = text.encode("utf-8")
            ref = SourceRef("inline", f"sources/{doc_id}.txt", _sha256(data))
            _atomic_write(self._source_path(doc_id, ref), data)
        else:
            path = Path(source_path).resolve()
            try:
                data = path.read_bytes()
            except OSError as exc:
                raise CollectionError(f"cannot read source {path}: {exc}") from exc
            try:
                text = data.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CollectionError(f"source {path} is not valid UTF-8: {exc}") from exc
            ref = SourceRef("by-reference", str(path), _sha256(data))

        doc = Document(doc_id, text, attributes=attributes, source=ref)
        self.doc_index[doc_id] = ref
        self._save_manifest()
        self.save_document(doc)
        return doc

    def save_document(self, doc: Document) -> bool:
        """Serialize a document's annotations and attributes to disk.

        The source is never touched. The write is atomic: a failure mid-way
        leaves the previously saved annotation file in place.
        """
        if doc.doc_id not in self.doc_index:
            raise CollectionError(f"document {doc.doc_id!r} does not belong to this collection")
        payload = {
            "doc_id": doc.doc_id,
            "text_digest": doc.digest,
            "next_id": doc.next_id,
            "attributes": encode_attrs(doc.attributes),
            "annotations": [
                encode_annotation(ann)
                for ann in sorted(doc.get_annotations(), key=lambda a: a.id)
            ],
        }
        try:
            _atomic_write(self._annotation_path(doc.doc_id), _dump_json(payload))
        except OSError as exc:
            raise CollectionError(f"cannot save document {doc.doc_id!r}: {exc}") from exc
        return True

    def load_document(self, doc_id: str) -> Document:
        """Read one document's source and annotations back from disk.

        A by-reference source whose bytes no longer match the ingest-time
        digest (or the digest recorded in the annotation file) is loaded
        anyway, with ``stale_digest`` set and a warning appended.
        """
        ref = self.doc_index.get(doc_id)
        if ref is None:
            raise CollectionError(f"no document {doc_id!r} in collection")
        source = self._source_path(doc_id, ref)
        try:
            data = source.read_bytes()
        except OSError as exc:
            raise CollectionError(f"cannot read source of {doc_id!r} ({source}): {exc}") from exc
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CollectionError(f"source of {doc_id!r} is not valid UTF-8: {exc}") from exc

        stale = False
        if _sha256(data) != ref.digest:
            stale = True
            self.warnings.append(f"source of document {doc_id!r} changed since ingest")

        ann_path = self._annotation_path(doc_id)
        try:
            payload = json.loads(ann_path.read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise CollectionError(f"cannot read annotations of {doc_id!r}: {exc}") from exc

        doc = Document(doc_id, text, attributes=decode_attrs(payload.get("attributes", {})), source=ref)
        if payload.get("text_digest") != doc.digest:
            stale = True
            self.warnings.append(
                f"annotations of document {doc_id!r} were saved against different text"
            )
        for entry in payload.get("annotations", []):
            doc._restore_annotation(
                entry["id"],
                entry["type"],
                decode_spans(entry["spans"]),
                decode_attrs(entry.get("attributes", {})),
            )
        doc.next_id = max(doc.next_id, int(payload.get("next_id", doc.next_id)))
        doc.stale_digest = stale
        return doc

    def document_ids(self) -> list[str]:
        return sorted(self.doc_index)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_index

    def __len__(self) -> int:
        return len(self.doc_index)


def create_collection(name: str, root: Union[str, Path]) -> Collection:
    return Collection.create(name, root)


def open_collection(root: Union[str, Path]) -> Collection:
    return Collection.open(root)
