"""Command-line surface: collections, modules, pipelines, markup, serving.

Exit codes follow convention: 0 success, 1 operational failure (message on
stderr), 2 usage error (argparse). Anything a script needs is available as
JSON via ``--json``; the default output is meant for humans.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

from .builtin import standard_engine
from .collection import create_collection, open_collection
from .errors import PipelineError, StandoffError
from .jsonio import encode_annotation, encode_attrs
from .markup import export_markup, import_markup
from .pipeline import Pipeline, PipelineEngine, load_pipeline
from .registry import build_compat_graph, serialize_descriptor
from .store import AnnotationTypeDecl, Span, validate_document


def _print_json(data) -> None:
    json.dump(data, sys.stdout, indent=2, ensure_ascii=False)
    sys.stdout.write("\n")


def _engine(args) -> PipelineEngine:
    return standard_engine(
        getattr(args, "modules_dir", None) or [],
        timeout=getattr(args, "timeout", None) or 60.0,
    )


def _load_pipeline_arg(spec: str) -> Pipeline:
    """Resolve a pipeline argument: a JSON file path, or a shipped name."""
    path = Path(spec)
    if path.exists():
        raw = path.read_text(encoding="utf-8")
    else:
        name = spec if spec.endswith(".json") else spec + ".json"
        shipped = resources.files("standoff").joinpath("data", "pipelines", name)
        if not shipped.is_file():
            raise PipelineError(f"pipeline file not found: {spec}")
        raw = shipped.read_text(encoding="utf-8")
    try:
        return load_pipeline(json.loads(raw))
    except json.JSONDecodeError as exc:
        raise PipelineError(f"pipeline {spec}: not valid JSON: {exc}") from exc


def _load_decls(path: str) -> list[AnnotationTypeDecl]:
    """Type declaration file: {"types": [{"type", "attributes": {name: kind}}]}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not isinstance(data.get("types"), list):
        raise StandoffError(f"{path}: expected an object with a types list")
    decls = []
    for entry in data["types"]:
        if not isinstance(entry, dict) or not isinstance(entry.get("type"), str):
            raise StandoffError(f"{path}: each entry needs a type name")
        attrs = entry.get("attributes", {})
        if not isinstance(attrs, dict):
            raise StandoffError(f"{path}: attributes must map names to kinds")
        decls.append(
            AnnotationTypeDecl(entry["type"], dict(attrs), entry.get("description", ""))
        )
    return decls


def _cmd_collection_create(args) -> int:
    coll = create_collection(args.name or Path(args.root).name, args.root)
    if args.json:
        _print_json({"name": coll.name, "root": str(coll.root)})
    else:
        print(f"created collection {coll.name!r} at {coll.root}")
    return 0


def _cmd_collection_add_doc(args) -> int:
    coll = open_collection(args.root)
    if args.by_reference:
        doc = coll.add_document(args.doc_id, source_path=args.by_reference)
    elif args.file:
        text = Path(args.file).read_text(encoding="utf-8")
        doc = coll.add_document(args.doc_id, text)
    else:
        doc = coll.add_document(args.doc_id, args.text)
    if args.json:
        _print_json({"doc_id": doc.doc_id, "digest": doc.digest, "length": len(doc)})
    else:
        print(f"added {doc.doc_id} ({len(doc)} bytes, digest {doc.digest[:12]})")
    return 0


def _cmd_collection_list(args) -> int:
    coll = open_collection(args.root)
    entries = []
    for doc_id in coll.document_ids():
        source = coll.doc_index[doc_id]
        entries.append(
            {
                "doc_id": doc_id,
                "mode": source.mode,
                "path": source.path,
                "digest": source.digest,
                "missing": doc_id in coll.missing,
            }
        )
    if args.json:
        _print_json({"name": coll.name, "root": str(coll.root), "documents": entries})
    else:
        print(f"collection {coll.name!r} at {coll.root}: {len(entries)} document(s)")
        for entry in entries:
            flags = " [missing source]" if entry["missing"] else ""
            where = f" <- {entry['path']}" if entry["path"] else ""
            print(f"  {entry['doc_id']} ({entry['mode']}){where}{flags}")
    return 0


def _cmd_modules_list(args) -> int:
    engine = _engine(args)
    if args.json:
        _print_json([serialize_descriptor(d) for d in engine.registry])
        return 0
    for descriptor in engine.registry:
        pre = ", ".join(c.ann_type for c in descriptor.pre) or "-"
        post = ", ".join(c.ann_type for c in descriptor.post)
        print(f"{descriptor.name:12} {descriptor.coupling:10} pre: {pre:20} post: {post}")
    return 0


def _cmd_modules_graph(args) -> int:
    graph = build_compat_graph(_engine(args).registry)
    if args.json:
        _print_json(graph.to_dict())
        return 0
    print("nodes:", ", ".join(graph.nodes))
    for edge in graph.edges:
        print(f"  {edge.src} -> {edge.dst}  via {', '.join(edge.types)}")
    return 0


def _cmd_pipeline_plan(args) -> int:
    engine = _engine(args)
    report = engine.plan(_load_pipeline_arg(args.pipeline))
    if args.json:
        _print_json(report.to_dict())
    else:
        verdict = "valid" if report.ok else "invalid"
        print(f"pipeline {report.pipeline!r} ({' -> '.join(report.stages)}): {verdict}")
        for problem in report.problems:
            print(f"  problem: {problem.message}")
        for warning in report.warnings:
            print(f"  warning: {warning}")
    return 0 if report.ok else 1


def _cmd_pipeline_run(args) -> int:
    engine = _engine(args)
    pipeline = _load_pipeline_arg(args.pipeline)
    coll = open_collection(args.collection)
    reports = engine.run_collection(
        pipeline,
        coll,
        doc_ids=args.doc_id or None,
        skip_satisfied=args.skip_satisfied,
        workers=args.workers,
    )
    if args.json:
        _print_json([report.to_dict() for report in reports])
    else:
        for report in reports:
            status = "ok" if report.ok else "FAILED"
            print(f"{report.doc_id}: {status} (+{report.total_added} annotations)")
            for record in report.stages:
                added = ", ".join(f"+{n} {t}" for t, n in sorted(record.added.items()))
                extras = [s for s in (added, record.message) if s]
                tail = f" ({'; '.join(extras)})" if extras else ""
                print(f"  {record.module}: {record.status}{tail}")
            if report.error:
                print(f"  error: {report.error}")
    return 0 if all(report.ok for report in reports) else 1


def _cmd_annotations_list(args) -> int:
    coll = open_collection(args.collection)
    doc = coll.load_document(args.doc_id)
    if (args.start is None) != (args.end is None):
        raise StandoffError("--start and --end must be supplied together")
    if args.start is not None:
        selected = doc.select_overlapping(Span(args.start, args.end), args.type)
    else:
        selected = doc.get_annotations(args.type)
    if args.json:
        _print_json([encode_annotation(ann) for ann in selected])
        return 0
    for ann in selected:
        spans = " ".join(f"({s.start},{s.end})" for s in ann.spans)
        attrs = ", ".join(
            f"{k}={v.target if hasattr(v, 'target') else v!r}"
            for k, v in sorted(ann.attributes.items())
        )
        print(f"{ann.id:4} {ann.ann_type:10} {spans:18} {attrs}")
    return 0


def _cmd_annotations_validate(args) -> int:
    coll = open_collection(args.collection)
    doc = coll.load_document(args.doc_id)
    decls = _load_decls(args.decls) if args.decls else []
    violations = validate_document(doc, decls)
    if args.json:
        _print_json(
            [
                {
                    "annotation": v.ann_id,
                    "kind": v.kind,
                    "attribute": v.attribute,
                    "detail": v.detail,
                }
                for v in violations
            ]
        )
    else:
        if not violations:
            print(f"{args.doc_id}: no violations")
        for v in violations:
            where = f"annotation {v.ann_id}" if v.ann_id is not None else "document"
            print(f"{where}: {v.kind} ({v.attribute}): {v.detail}")
    return 0 if not violations else 1


def _cmd_import_markup(args) -> int:
    data = Path(args.file).read_bytes()
    doc, report = import_markup(data, args.doc_id)
    coll = open_collection(args.collection)
    stored = coll.add_document(args.doc_id, doc.text)
    for ann in doc.get_annotations():
        stored.add_annotation(ann.ann_type, ann.spans, dict(ann.attributes))
    coll.save_document(stored)
    summary = {
        "doc_id": args.doc_id,
        "created": report.created,
        "warnings": report.warnings,
        "length": len(stored),
    }
    if args.json:
        _print_json(summary)
    else:
        counts = ", ".join(f"{n} {t}" for t, n in sorted(report.created.items())) or "none"
        print(f"imported {args.doc_id} ({len(stored)} bytes; annotations: {counts})")
        for warning in report.warnings:
            print(f"  warning: {warning}", file=sys.stderr)
    return 0


def _cmd_export_markup(args) -> int:
    coll = open_collection(args.collection)
    doc = coll.load_document(args.doc_id)
    types = (
        [t for t in (args.types or "").split(",") if t]
        if args.types
        else doc.annotation_types()
    )
    data = export_markup(doc, types, args.overlap)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(
        args.collection,
        host=args.host,
        port=args.port,
        modules_dirs=args.modules_dir or [],
        ui_dir=args.ui_dir,
        timeout=args.timeout,
    )
    return 0


def _add_modules_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--modules-dir",
        action="append",
        metavar="DIR",
        help="extra descriptor directory (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="standoff",
        description="Stand-off annotation toolkit: collections, modules, pipelines, markup.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_coll = sub.add_parser("collection", help="manage document collections")
    coll_sub = p_coll.add_subparsers(dest="subcommand", required=True)

    p = coll_sub.add_parser("create", help="create a new collection")
    p.add_argument("root", help="directory to create")
    p.add_argument("--name", help="collection name (default: directory name)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_collection_create)

    p = coll_sub.add_parser("add-doc", help="add a document")
    p.add_argument("root")
    p.add_argument("doc_id")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--text", help="inline document text")
    source.add_argument("--file", help="read text from a file, stored inline")
    source.add_argument(
        "--by-reference",
        metavar="PATH",
        help="reference an external source file; never copied or rewritten",
    )
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_collection_add_doc)

    p = coll_sub.add_parser("list", help="list documents")
    p.add_argument("root")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_collection_list)

    p_mod = sub.add_parser("modules", help="inspect the module registry")
    mod_sub = p_mod.add_subparsers(dest="subcommand", required=True)

    p = mod_sub.add_parser("list", help="list module descriptors")
    _add_modules_dir(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_modules_list)

    p = mod_sub.add_parser("graph", help="show the compatibility graph")
    _add_modules_dir(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_modules_graph)

    p_pipe = sub.add_parser("pipeline", help="plan and run pipelines")
    pipe_sub = p_pipe.add_subparsers(dest="subcommand", required=True)

    p = pipe_sub.add_parser("plan", help="validate stage order against descriptors")
    p.add_argument("--pipeline", required=True, help="pipeline JSON file or shipped name")
    _add_modules_dir(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_pipeline_plan)

    p = pipe_sub.add_parser("run", help="run a pipeline over a collection")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--doc-id", action="append", help="limit to these documents (repeatable)")
    p.add_argument("--skip-satisfied", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timeout", type=float, default=60.0, help="external module timeout (s)")
    _add_modules_dir(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_pipeline_run)

    p_ann = sub.add_parser("annotations", help="query and validate annotations")
    ann_sub = p_ann.add_subparsers(dest="subcommand", required=True)

    p = ann_sub.add_parser("list", help="list annotations, optionally by window")
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--type")
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_annotations_list)

    p = ann_sub.add_parser("validate", help="check declarations and references")
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--decls", help="type declaration JSON file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_annotations_validate)

    p = sub.add_parser("import-markup", help="convert inline markup to a stored document")
    p.add_argument("file")
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_import_markup)

    p = sub.add_parser("export-markup", help="serialize annotations as inline markup")
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--types", help="comma-separated annotation types (default: all)")
    p.add_argument("--overlap", choices=["nest-only", "milestone"], default="nest-only")
    p.add_argument("-o", "--output", help="write to a file instead of stdout")
    p.set_defaults(func=_cmd_export_markup)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--collection", required=True, metavar="ROOT")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--ui-dir", help="static browser app to mount under /ui")
    p.add_argument("--timeout", type=float, default=60.0)
    _add_modules_dir(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def cli_dispatch(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StandoffError as exc:
        print(f"standoff: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"standoff: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


def main() -> int:
    return cli_dispatch()


if __name__ == "__main__":
    sys.exit(main())
