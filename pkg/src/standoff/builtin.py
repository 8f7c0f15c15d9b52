"""The four shipped in-process modules and their lookup resources.

Together they take a raw document to the full analysis of the golden
example: a tokenizer (no requirements), a lexicon part-of-speech tagger, a
gazetteer name recognizer, and a sentence splitter (all three requiring
tokens). Each is a pure function of the document view plus its resource,
returning buffered output for the engine to apply.

The tagger is deliberately the one module that touches existing
annotations: it adds a ``pos`` attribute to word tokens. Ids, types, spans,
and existing attribute values stay untouched, which keeps the add-only
execution rule intact.
"""

from __future__ import annotations

import sys
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .pipeline import DEFAULT_TIMEOUT, NewAnnotation, PipelineEngine, StageOutput
from .registry import Condition, EXTERNAL, ModuleDescriptor, builtin_registry
from .store import Document, Span

SENTENCE_TERMINATORS = frozenset(".!?")
CATEGORIES = ("person", "organization", "location")

TOKEN = "token"
NAME = "name"
SENTENCE = "sentence"


def tokenize(text: str) -> list[tuple[Span, str]]:
    """Split text into (byte span, surface form) tokens.

    Maximal runs of alphanumeric characters are word tokens; every other
    non-whitespace character stands alone; whitespace separates and is never
    covered. Offsets count UTF-8 bytes, so multi-byte characters advance by
    their encoded width.
    """
    tokens: list[tuple[Span, str]] = []
    pos = 0
    run_start: Optional[int] = None
    run: list[str] = []

    def flush() -> None:
        nonlocal run_start
        if run:
            tokens.append((Span(run_start, pos), "".join(run)))
            run.clear()
            run_start = None

    for ch in text:
        width = len(ch.encode("utf-8"))
        if ch.isalnum():
            if run_start is None:
                run_start = pos
            run.append(ch)
        else:
            flush()
            if not ch.isspace():
                tokens.append((Span(pos, pos + width), ch))
        pos += width
    flush()
    return tokens


def _parse_tsv(lines: Iterable[str], what: str) -> dict[str, str]:
    # form<TAB>value per line; blank lines and #-comments tolerated
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        form, sep, value = line.partition("\t")
        form, value = form.strip(), value.strip()
        if not sep or not form or not value:
            raise ValueError(f"{what} line {lineno}: expected form<TAB>value")
        if form in entries:
            raise ValueError(f"{what} line {lineno}: duplicate form {form!r}")
        entries[form] = value
    return entries


class Lexicon:
    """Case-sensitive surface-form to part-of-speech lookup."""

    def __init__(self, tags: Mapping[str, str]):
        for form in tags:
            if not form:
                raise ValueError("lexicon forms must be non-empty")
        self._tags = dict(tags)

    def tag(self, form: str, default: str = "NN") -> str:
        return self._tags.get(form, default)

    def __contains__(self, form: str) -> bool:
        return form in self._tags

    def __len__(self) -> int:
        return len(self._tags)

    def items(self):
        return self._tags.items()

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Lexicon":
        return cls(_parse_tsv(lines, "lexicon"))

    @classmethod
    def from_tsv(cls, path: Union[str, Path]) -> "Lexicon":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())


class Gazetteer:
    """Surface forms mapped to entity categories, matched over token runs.

    Multi-word forms are split on single spaces and matched against
    consecutive token surface forms.
    """

    def __init__(self, categories: Mapping[str, str]):
        self._categories = dict(categories)
        self._by_tokens: dict[tuple[str, ...], str] = {}
        self.max_entry_tokens = 0
        for form, category in self._categories.items():
            if not form:
                raise ValueError("gazetteer forms must be non-empty")
            if category not in CATEGORIES:
                raise ValueError(
                    f"gazetteer form {form!r}: category must be one of {', '.join(CATEGORIES)}"
                )
            words = tuple(form.split(" "))
            if any(not word for word in words):
                raise ValueError(f"gazetteer form {form!r}: words must be single-space separated")
            self._by_tokens[words] = category
            self.max_entry_tokens = max(self.max_entry_tokens, len(words))

    def category(self, form: str) -> Optional[str]:
        return self._categories.get(form)

    def lookup_tokens(self, words: tuple[str, ...]) -> Optional[str]:
        return self._by_tokens.get(words)

    def __len__(self) -> int:
        return len(self._categories)

    def items(self):
        return self._categories.items()

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Gazetteer":
        return cls(_parse_tsv(lines, "gazetteer"))

    @classmethod
    def from_tsv(cls, path: Union[str, Path]) -> "Gazetteer":
        return cls.from_lines(Path(path).read_text(encoding="utf-8").splitlines())


def match_names(tokens: list[tuple[Span, str]], gazetteer: Gazetteer) -> list[tuple[Span, str]]:
    """Leftmost-longest gazetteer matches over a token sequence.

    At each position the longest matching entry wins and consumes its
    tokens, so results never overlap.
    """
    texts = [text for _, text in tokens]
    matches: list[tuple[Span, str]] = []
    i = 0
    while i < len(tokens):
        found = None
        for length in range(min(gazetteer.max_entry_tokens, len(tokens) - i), 0, -1):
            category = gazetteer.lookup_tokens(tuple(texts[i : i + length]))
            if category is not None:
                found = (length, category)
                break
        if found is None:
            i += 1
            continue
        length, category = found
        matches.append((Span(tokens[i][0].start, tokens[i + length - 1][0].end), category))
        i += length
    return matches


def split_sentences(tokens: list[tuple[Span, str]]) -> list[Span]:
    """Sentence spans over a token sequence, terminator-driven.

    A sentence ends at each '.', '!' or '?' token; its span runs from the
    first byte of its first token to the end of the terminator, or of the
    last token when the text trails off without one. Every token lands in
    exactly one sentence.
    """
    sentences: list[Span] = []
    start: Optional[int] = None
    last_end = 0
    for span, text in tokens:
        if start is None:
            start = span.start
        last_end = span.end
        if text in SENTENCE_TERMINATORS:
            sentences.append(Span(start, span.end))
            start = None
    if start is not None:
        sentences.append(Span(start, last_end))
    return sentences


def _data_root():
    return resources.files("standoff").joinpath("data")


@lru_cache(maxsize=None)
def default_lexicon() -> Lexicon:
    text = _data_root().joinpath("lexicon.tsv").read_text(encoding="utf-8")
    return Lexicon.from_lines(text.splitlines())


@lru_cache(maxsize=None)
def default_gazetteer() -> Gazetteer:
    text = _data_root().joinpath("gazetteer.tsv").read_text(encoding="utf-8")
    return Gazetteer.from_lines(text.splitlines())


def _doc_tokens(doc: Document) -> list[tuple[Span, str, int]]:
    # (overall span, concatenated surface form, annotation id) in document order
    out = []
    for ann in doc.get_annotations(TOKEN):
        text = "".join(doc.span_text(span) for span in ann.spans)
        out.append((Span(ann.start, ann.end), text, ann.id))
    return out


def run_tokenizer(doc: Document, params: dict) -> StageOutput:
    return StageOutput(
        new_annotations=[NewAnnotation(TOKEN, (span,)) for span, _ in tokenize(doc.text)]
    )


def run_tagger(doc: Document, params: dict) -> StageOutput:
    path = params.get("lexicon", "")
    lexicon = Lexicon.from_tsv(path) if path else default_lexicon()
    default_tag = params.get("default_tag", "NN")
    additions = []
    for _, text, ann_id in _doc_tokens(doc):
        if not text.isalnum():
            continue  # punctuation carries no pos
        tag = lexicon.tag(text, default_tag)
        if doc.get(ann_id).attributes.get("pos") != tag:
            additions.append((ann_id, "pos", tag))
    return StageOutput(attribute_additions=additions)


def run_gazetteer(doc: Document, params: dict) -> StageOutput:
    path = params.get("gazetteer", "")
    gazetteer = Gazetteer.from_tsv(path) if path else default_gazetteer()
    tokens = [(span, text) for span, text, _ in _doc_tokens(doc)]
    return StageOutput(
        new_annotations=[
            NewAnnotation(NAME, (span,), {"name_type": category})
            for span, category in match_names(tokens, gazetteer)
        ]
    )


def run_splitter(doc: Document, params: dict) -> StageOutput:
    tokens = [(span, text) for span, text, _ in _doc_tokens(doc)]
    return StageOutput(
        new_annotations=[NewAnnotation(SENTENCE, (span,)) for span in split_sentences(tokens)]
    )


def builtin_impls() -> dict:
    return {
        "tokenizer": run_tokenizer,
        "tagger": run_tagger,
        "gazetteer": run_gazetteer,
        "splitter": run_splitter,
    }


def standard_engine(
    extra_module_dirs: Iterable[Union[str, Path]] = (),
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> PipelineEngine:
    """Engine preloaded with the shipped modules plus any descriptor dirs."""
    registry = builtin_registry()
    for directory in extra_module_dirs:
        registry.load_dir(directory)
    return PipelineEngine(registry, builtin_impls(), timeout=timeout)


def external_tokenizer_script() -> Path:
    """Filesystem path of the shipped reference external tokenizer."""
    return Path(str(_data_root().joinpath("ext_tokenizer.py")))


def external_tokenizer_descriptor(name: str = "ext-tokenizer") -> ModuleDescriptor:
    """Descriptor invoking the reference tokenizer as a subprocess.

    Built programmatically because the command embeds the interpreter and
    the installed script path, neither of which is known statically.
    """
    return ModuleDescriptor(
        name=name,
        coupling=EXTERNAL,
        command=(sys.executable, str(external_tokenizer_script())),
        pre=(),
        post=(Condition(TOKEN),),
        viewer="generic-table",
    )
