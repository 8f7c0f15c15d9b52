"""Descriptors for processing modules and the compatibility graph.

A descriptor declares everything the engine needs to know about a module
without importing or running it: what annotation types (and attributes) it
needs to find in a document before it can run, what it promises to add, how
it is invoked, which parameters it takes, and a viewer hint for result
display. Descriptors live in ``modules.d/*.json`` files; the four built-in
modules ship as package data in the same format.

Module A feeds module B when some annotation type A promises appears among
B's requirements. Those edges form the compatibility graph that drives both
pipeline planning and the "what can run next" question.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .errors import DescriptorError
from .store import Document

IN_PROCESS = "in-process"
EXTERNAL = "external"
COUPLINGS = (IN_PROCESS, EXTERNAL)

PARAM_TEXT = "text"
PARAM_INT = "int"
PARAM_FLAG = "flag"
PARAM_KINDS = (PARAM_TEXT, PARAM_INT, PARAM_FLAG)

VIEWERS = ("none", "generic-table", "highlight", "tree")

_NAME_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9._-]*\Z")

_PARAM_DEFAULTS = {PARAM_TEXT: "", PARAM_INT: 0, PARAM_FLAG: False}


@dataclass(frozen=True)
class Condition:
    """One requirement or promise: an annotation type plus attribute names.

    Satisfied by a document when at least one annotation of the type carries
    all the named attributes; an empty name list means bare existence.
    """

    ann_type: str
    attributes: tuple[str, ...] = ()

    def satisfied_by(self, doc: Document) -> bool:
        for ann in doc.get_annotations(self.ann_type):
            if all(name in ann.attributes for name in self.attributes):
                return True
        return False


@dataclass(frozen=True)
class Parameter:
    name: str
    kind: str = PARAM_TEXT
    default: Union[str, int, bool, None] = None

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise DescriptorError(f"parameter {self.name!r}: unknown kind {self.kind!r}")
        if self.default is None:
            object.__setattr__(self, "default", _PARAM_DEFAULTS[self.kind])
        expected = {PARAM_TEXT: str, PARAM_INT: int, PARAM_FLAG: bool}[self.kind]
        if not isinstance(self.default, expected) or (
            self.kind == PARAM_INT and isinstance(self.default, bool)
        ):
            raise DescriptorError(
                f"parameter {self.name!r}: default {self.default!r} does not match kind {self.kind!r}"
            )


@dataclass(frozen=True)
class ModuleDescriptor:
    name: str
    coupling: str = IN_PROCESS
    command: tuple[str, ...] = ()
    pre: tuple[Condition, ...] = ()
    post: tuple[Condition, ...] = ()
    params: tuple[Parameter, ...] = ()
    viewer: str = "generic-table"

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise DescriptorError(f"invalid module name {self.name!r}")
        if self.coupling not in COUPLINGS:
            raise DescriptorError(f"module {self.name!r}: unknown coupling {self.coupling!r}")
        if self.coupling == EXTERNAL and not self.command:
            raise DescriptorError(f"module {self.name!r}: external coupling requires a command")
        if self.coupling == IN_PROCESS and self.command:
            raise DescriptorError(f"module {self.name!r}: command is only valid for external coupling")
        if not self.post:
            # a module that promises nothing can never appear in a useful plan
            raise DescriptorError(f"module {self.name!r}: postconditions must be non-empty")
        if self.viewer not in VIEWERS:
            raise DescriptorError(f"module {self.name!r}: unknown viewer {self.viewer!r}")
        seen = set()
        for param in self.params:
            if param.name in seen:
                raise DescriptorError(f"module {self.name!r}: duplicate parameter {param.name!r}")
            seen.add(param.name)

    def pre_types(self) -> set[str]:
        return {condition.ann_type for condition in self.pre}

    def post_types(self) -> set[str]:
        return {condition.ann_type for condition in self.post}

    def runnable_on(self, doc: Document) -> bool:
        return all(condition.satisfied_by(doc) for condition in self.pre)

    def default_params(self) -> dict[str, Union[str, int, bool]]:
        return {param.name: param.default for param in self.params}

    def resolve_params(self, overrides: Optional[dict] = None) -> dict:
        """Merge overrides into the declared defaults, checking names and kinds."""
        resolved = self.default_params()
        for name, value in (overrides or {}).items():
            param = next((p for p in self.params if p.name == name), None)
            if param is None:
                raise DescriptorError(f"module {self.name!r}: unknown parameter {name!r}")
            expected = {PARAM_TEXT: str, PARAM_INT: int, PARAM_FLAG: bool}[param.kind]
            if not isinstance(value, expected) or (
                param.kind == PARAM_INT and isinstance(value, bool)
            ):
                raise DescriptorError(
                    f"module {self.name!r}: parameter {name!r} expects {param.kind}, got {value!r}"
                )
            resolved[name] = value
        return resolved


def _require(data: dict, key: str, expected_type, context: str, default=None, required=False):
    if key not in data:
        if required:
            raise DescriptorError(f"{context}: missing {key!r}")
        return default
    value = data[key]
    if not isinstance(value, expected_type) or (expected_type is int and isinstance(value, bool)):
        raise DescriptorError(f"{context}: {key!r} must be {expected_type.__name__}")
    return value


def _load_condition(data, context: str) -> Condition:
    if not isinstance(data, dict):
        raise DescriptorError(f"{context}: condition must be an object")
    unknown = set(data) - {"type", "attrs"}
    if unknown:
        raise DescriptorError(f"{context}: unknown condition keys {sorted(unknown)}")
    ann_type = _require(data, "type", str, context, required=True)
    attrs = _require(data, "attrs", list, context, default=[])
    if not all(isinstance(name, str) for name in attrs):
        raise DescriptorError(f"{context}: attrs must be strings")
    return Condition(ann_type, tuple(attrs))


def _load_parameter(data, context: str) -> Parameter:
    if not isinstance(data, dict):
        raise DescriptorError(f"{context}: parameter must be an object")
    unknown = set(data) - {"name", "kind", "default"}
    if unknown:
        raise DescriptorError(f"{context}: unknown parameter keys {sorted(unknown)}")
    name = _require(data, "name", str, context, required=True)
    kind = _require(data, "kind", str, context, default=PARAM_TEXT)
    default = data.get("default")
    if default is not None and not isinstance(default, (str, int, bool)):
        raise DescriptorError(f"{context}: parameter {name!r} default must be text, int, or flag")
    try:
        return Parameter(name, kind, default)
    except DescriptorError:
        raise
    except ValueError as exc:
        raise DescriptorError(f"{context}: {exc}") from exc


def load_descriptor(data: dict) -> ModuleDescriptor:
    """Build a descriptor from its JSON object form, validating the schema."""
    if not isinstance(data, dict):
        raise DescriptorError("descriptor must be a JSON object")
    allowed = {"name", "coupling", "command", "pre", "post", "params", "viewer"}
    unknown = set(data) - allowed
    if unknown:
        raise DescriptorError(f"unknown descriptor keys {sorted(unknown)}")
    name = _require(data, "name", str, "descriptor", required=True)
    context = f"module {name!r}"
    command = _require(data, "command", list, context, default=[])
    if not all(isinstance(part, str) for part in command):
        raise DescriptorError(f"{context}: command must be a list of strings")
    pre = [_load_condition(c, context) for c in _require(data, "pre", list, context, default=[])]
    post = [_load_condition(c, context) for c in _require(data, "post", list, context, required=True)]
    params = [_load_parameter(p, context) for p in _require(data, "params", list, context, default=[])]
    return ModuleDescriptor(
        name=name,
        coupling=_require(data, "coupling", str, context, default=IN_PROCESS),
        command=tuple(command),
        pre=tuple(pre),
        post=tuple(post),
        params=tuple(params),
        viewer=_require(data, "viewer", str, context, default="generic-table"),
    )


def serialize_descriptor(descriptor: ModuleDescriptor) -> dict:
    return {
        "name": descriptor.name,
        "coupling": descriptor.coupling,
        "command": list(descriptor.command),
        "pre": [{"type": c.ann_type, "attrs": list(c.attributes)} for c in descriptor.pre],
        "post": [{"type": c.ann_type, "attrs": list(c.attributes)} for c in descriptor.post],
        "params": [
            {"name": p.name, "kind": p.kind, "default": p.default} for p in descriptor.params
        ],
        "viewer": descriptor.viewer,
    }


class Registry:
    """Named collection of module descriptors, in registration order."""

    def __init__(self, descriptors: Iterable[ModuleDescriptor] = ()):
        self._by_name: dict[str, ModuleDescriptor] = {}
        for descriptor in descriptors:
            self.register(descriptor)

    def register(self, descriptor: ModuleDescriptor) -> None:
        if descriptor.name in self._by_name:
            raise DescriptorError(f"duplicate module name {descriptor.name!r}")
        self._by_name[descriptor.name] = descriptor

    def load_dir(self, directory: Union[str, Path]) -> list[str]:
        """Register every ``*.json`` descriptor in a directory, sorted by file name.

        Returns the module names registered, in that order. A file that is
        not valid JSON or not a valid descriptor fails the whole load.
        """
        directory = Path(directory)
        loaded = []
        for path in sorted(directory.glob("*.json")):
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise DescriptorError(f"{path}: not valid JSON: {exc}") from exc
            try:
                descriptor = load_descriptor(data)
            except DescriptorError as exc:
                raise DescriptorError(f"{path}: {exc}") from exc
            self.register(descriptor)
            loaded.append(descriptor.name)
        return loaded

    def get(self, name: str) -> ModuleDescriptor:
        try:
            return self._by_name[name]
        except KeyError:
            raise DescriptorError(f"unknown module {name!r}") from None

    def names(self) -> list[str]:
        return list(self._by_name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[ModuleDescriptor]:
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)


def builtin_registry() -> Registry:
    """Registry of the four shipped modules, loaded from package data."""
    registry = Registry()
    root = resources.files("standoff").joinpath("data", "modules.d")
    entries = sorted(root.iterdir(), key=lambda entry: entry.name)
    for entry in entries:
        if entry.name.endswith(".json"):
            descriptor = load_descriptor(json.loads(entry.read_text(encoding="utf-8")))
            registry.register(descriptor)
    return registry


@dataclass(frozen=True)
class Edge:
    """A feeds B: ``types`` is what A promises that B requires."""

    src: str
    dst: str
    types: tuple[str, ...]


@dataclass(frozen=True)
class CompatGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def successors(self, name: str) -> list[str]:
        return [edge.dst for edge in self.edges if edge.src == name]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {"from": edge.src, "to": edge.dst, "types": list(edge.types)}
                for edge in self.edges
            ],
        }


def build_compat_graph(modules: Union[Registry, Iterable[ModuleDescriptor]]) -> CompatGraph:
    """Edges run from producers to consumers of at least one shared type.

    Self-edges are excluded even when a module consumes what it produces.
    Nodes and edges come out sorted by name for stable display and JSON.
    """
    descriptors = sorted(modules, key=lambda descriptor: descriptor.name)
    edges = []
    for producer in descriptors:
        produced = producer.post_types()
        if not produced:
            continue
        for consumer in descriptors:
            if consumer.name == producer.name:
                continue
            shared = produced & consumer.pre_types()
            if shared:
                edges.append(Edge(producer.name, consumer.name, tuple(sorted(shared))))
    return CompatGraph(
        nodes=tuple(descriptor.name for descriptor in descriptors),
        edges=tuple(edges),
    )


def modules_runnable(doc: Document, modules: Union[Registry, Iterable[ModuleDescriptor]]) -> list[str]:
    """Names of modules whose every requirement the document satisfies now."""
    return [descriptor.name for descriptor in modules if descriptor.runnable_on(doc)]
