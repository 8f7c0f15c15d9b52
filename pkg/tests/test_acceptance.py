"""Acceptance gate: one announced verdict per release criterion.

Every test restates its expected values and reference logic locally, so a
regression in the library cannot silently rewrite the yardstick it is
measured against. Each criterion prints a single PASS/FAIL line.
"""

import hashlib
import random
import sys
import time

import pytest

from standoff import (
    AnnRef,
    Condition,
    Document,
    ModuleDescriptor,
    PipelineEngine,
    Registry,
    StandoffError,
    build_compat_graph,
    builtin_registry,
    create_collection,
    export_markup,
    external_tokenizer_descriptor,
    invoke_external,
    load_descriptor,
    load_pipeline,
    open_collection,
    roundtrip_check,
    standard_engine,
    tokenize,
)
from standoff.pipeline import Stage, Pipeline

LABELS = {
    "test_golden_analysis_chain": "golden analysis chain reproduces the worked example",
    "test_window_selection_against_linear_scan": "window selection matches a linear reference scan",
    "test_compatibility_graph_against_brute_force": "compatibility graph matches brute force",
    "test_markup_round_trips_are_byte_identical": "markup round trips are byte-identical",
    "test_write_protected_source_is_never_modified": "write-protected sources stay untouched",
    "test_persistence_round_trips_and_interrupted_save": "persistence round trips and survives interrupted saves",
    "test_external_tokenizer_parity_and_fault_isolation": "external tokenizer matches the builtin and fails safely",
    "test_planner_verdicts_on_stage_order": "planner verdicts on stage order",
}


@pytest.fixture(autouse=True)
def announce(request, capsys):
    yield
    report = getattr(request.node, "report_call", None)
    if report is None:
        return
    name = getattr(request.node, "originalname", None) or request.node.name
    verdict = "PASS" if report.passed else "FAIL"
    with capsys.disabled():
        print(f"acceptance {verdict}: {LABELS.get(name, name)}")


GOLDEN_TEXT = "Sarah savored the soup."


def full_chain():
    return load_pipeline(
        {"name": "vie", "stages": ["tokenizer", "tagger", "gazetteer", "splitter"]}
    )


def table(doc):
    rows = [
        (ann.id, ann.ann_type, [(s.start, s.end) for s in ann.spans], dict(ann.attributes))
        for ann in doc.get_annotations()
    ]
    rows.sort(key=lambda row: row[0])
    return rows


# -- criterion: the worked example, reproduced exactly ------------------


def test_golden_analysis_chain():
    engine = standard_engine()
    doc = Document("fig1", GOLDEN_TEXT)
    started = time.perf_counter()
    report = engine.run(full_chain(), doc)
    elapsed = time.perf_counter() - started

    assert report.ok
    assert table(doc) == [
        (1, "token", [(0, 5)], {"pos": "NP"}),
        (2, "token", [(6, 13)], {"pos": "VBD"}),
        (3, "token", [(14, 17)], {"pos": "DT"}),
        (4, "token", [(18, 22)], {"pos": "NN"}),
        (5, "token", [(22, 23)], {}),
        (6, "name", [(0, 5)], {"name_type": "person"}),
        (7, "sentence", [(0, 23)], {}),
    ]
    assert elapsed < 1.0, f"golden chain took {elapsed:.3f}s, promised under 1s"


# -- criterion: window selection vs a linear reference scan -------------


def selected_by(span, window):
    """The selection rule, written out again from the definition."""
    (s, e), (ws, we) = span, window
    if ws == we:
        return s == e == ws
    if s == e:
        return ws <= s < we
    return s < we and ws < e


def test_window_selection_against_linear_scan():
    rng = random.Random(0xA2)
    cases = 0
    started = time.perf_counter()
    while cases < 10_000:
        size = rng.randrange(0, 64)
        doc = Document("d", "x" * size)
        for _ in range(rng.randrange(0, 12)):
            cuts = sorted(rng.randrange(0, size + 1) for _ in range(4))
            spans = [(cuts[0], cuts[1])]
            if rng.random() < 0.3:
                spans.append((cuts[2], cuts[3]))
            try:
                doc.add_annotation("t", spans)
            except StandoffError:
                pass
        for _ in range(20):
            lo = rng.randrange(0, size + 1)
            hi = rng.randrange(lo, size + 1)
            expected = [
                ann.id
                for ann in doc.get_annotations()
                if any(selected_by((s.start, s.end), (lo, hi)) for s in ann.spans)
            ]
            actual = [ann.id for ann in doc.select_overlapping((lo, hi))]
            assert actual == expected, f"window ({lo}, {hi}) over {table(doc)}"
            cases += 1
    elapsed = time.perf_counter() - started
    assert cases == 10_000
    assert elapsed < 30.0, f"10,000 selection checks took {elapsed:.1f}s, promised under 30s"


# -- criterion: compatibility graph vs brute force ----------------------


def test_compatibility_graph_against_brute_force():
    rng = random.Random(0xA3)
    pool = [f"t{i}" for i in range(7)]

    module_sets = [list(builtin_registry())]
    while len(module_sets) < 1000:
        descriptors = []
        for index in range(rng.randrange(1, 8)):
            pre = rng.sample(pool, rng.randrange(0, 4))
            post = rng.sample(pool, rng.randrange(1, 4))
            descriptors.append(
                ModuleDescriptor(
                    name=f"m{index}",
                    pre=tuple(Condition(t) for t in pre),
                    post=tuple(Condition(t) for t in post),
                )
            )
        module_sets.append(descriptors)

    for descriptors in module_sets:
        expected = set()
        for producer in descriptors:
            for consumer in descriptors:
                if producer.name == consumer.name:
                    continue
                shared = {c.ann_type for c in producer.post} & {
                    c.ann_type for c in consumer.pre
                }
                if shared:
                    expected.add((producer.name, consumer.name, tuple(sorted(shared))))
        graph = build_compat_graph(descriptors)
        assert {(e.src, e.dst, tuple(e.types)) for e in graph.edges} == expected
        assert sorted(graph.nodes) == sorted(d.name for d in descriptors)
    assert len(module_sets) == 1000


# -- criterion: markup round trips, byte-identical ----------------------


def random_annotated_document(rng, index):
    alphabet = "ab c.é中😀&<>'!x "
    text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 30)))
    doc = Document(f"m{index}", text)
    names = ("p", "seg", "note", "w")

    def build(lo, hi, depth):
        pairs = rng.randrange(0, 3)
        cuts = sorted(rng.randrange(lo, hi + 1) for _ in range(2 * pairs))
        for i in range(pairs):
            a, b = cuts[2 * i], cuts[2 * i + 1]
            attrs = {}
            if rng.random() < 0.5:
                attrs["v"] = rng.choice(("x", "a&b", "<t>", "é中", ""))
            if rng.random() < 0.2:
                attrs["n"] = str(rng.randrange(100))
            doc.add_annotation(rng.choice(names), [(a, b)], attrs)
            if depth < 3 and b > a:
                build(a, b, depth + 1)

    build(0, len(doc), 0)
    return doc


def test_markup_round_trips_are_byte_identical():
    rng = random.Random(0xA4)
    multibyte_docs = 0
    for index in range(200):
        doc = random_annotated_document(rng, index)
        if len(doc.text.encode("utf-8")) > len(doc.text):
            multibyte_docs += 1
        exported = export_markup(doc, doc.annotation_types())
        result = roundtrip_check(exported)
        assert result.byte_equal, f"round trip changed bytes for {table(doc)}"
        assert result.canonical_equal
    assert multibyte_docs >= 100  # the corpus genuinely exercises multi-byte text


# -- criterion: write-protected sources stay untouched ------------------


def test_write_protected_source_is_never_modified(tmp_path):
    source = tmp_path / "protected.txt"
    source.write_text(GOLDEN_TEXT, "utf-8")
    source.chmod(0o444)
    digest_before = hashlib.sha256(source.read_bytes()).hexdigest()

    coll = create_collection("c", tmp_path / "coll")
    coll.add_document("guarded", source_path=source)
    reports = standard_engine().run_collection(full_chain(), coll)
    assert [r.ok for r in reports] == [True]

    loaded = coll.load_document("guarded")
    assert len(loaded.get_annotations()) == 7
    assert not loaded.stale_digest
    assert hashlib.sha256(source.read_bytes()).hexdigest() == digest_before
    assert source.stat().st_mode & 0o777 == 0o444


# -- criterion: persistence round trips + interrupted save --------------


def scribble(rng, doc):
    """Apply a random mutation history: additions, removals, attributes."""
    for _ in range(rng.randrange(0, 10)):
        size = len(doc)
        cuts = sorted(rng.randrange(0, size + 1) for _ in range(4))
        spans = [(cuts[0], cuts[1])]
        if cuts[2] > cuts[1] and rng.random() < 0.4:
            spans.append((cuts[2], cuts[3]))
        attrs = {}
        if rng.random() < 0.5:
            attrs["label"] = rng.choice(("NP", "中 é", "a&b", ""))
        if rng.random() < 0.3:
            attrs["rank"] = rng.randrange(-10, 1000)
        if doc.next_id > 1 and rng.random() < 0.25:
            attrs["parent"] = AnnRef(rng.randrange(1, doc.next_id))
        doc.add_annotation(rng.choice(("token", "name", "x.y")), spans, attrs)
    for _ in range(rng.randrange(0, 2)):
        if doc.next_id > 1:
            doc.remove_annotation(rng.randrange(1, doc.next_id))
    if rng.random() < 0.4:
        doc.attributes.setdefault("origin", "généré")


def state(doc):
    return (doc.text, doc.digest, doc.next_id, dict(doc.attributes), table(doc))


def test_persistence_round_trips_and_interrupted_save(tmp_path, monkeypatch):
    rng = random.Random(0xA6)
    coll = create_collection("c", tmp_path / "c")
    alphabet = "xy z.é中😀\"&<\n"
    for index in range(200):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        doc = coll.add_document(f"doc{index}", text)
        scribble(rng, doc)
        snapshot = state(doc)
        coll.save_document(doc)
        loaded = open_collection(coll.root).load_document(f"doc{index}")
        assert state(loaded) == snapshot

    # an interrupted rewrite must leave the last saved state loadable
    victim = coll.load_document("doc199")
    saved = state(victim)

    def refuse(src, dst):
        raise OSError("simulated crash mid-save")

    monkeypatch.setattr("standoff.collection.os.replace", refuse)
    victim.add_annotation("late", [(0, 0)])
    with pytest.raises(StandoffError):
        coll.save_document(victim)
    monkeypatch.undo()

    recovered = open_collection(coll.root).load_document("doc199")
    assert state(recovered) == saved


# -- criterion: external tokenizer parity and fault isolation -----------


FAULT_BODIES = {
    "garbage": "print('** certainly not a protocol response **')\n",
    "bad-span": (
        "import json\n"
        "print(json.dumps({'proto': 1, 'new_annotations':"
        " [{'type': 'token', 'spans': [[0, 9999]]}]}))\n"
    ),
    "crash": "import sys\nsys.stderr.write('injected failure')\nsys.exit(3)\n",
}


def test_external_tokenizer_parity_and_fault_isolation(tmp_path):
    descriptor = external_tokenizer_descriptor()
    rng = random.Random(0xA7)
    alphabet = "ab _.!?é中😀\t\n\x1c's-NY"
    for index in range(100):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        doc = Document(f"t{index}", text)
        added = invoke_external(descriptor, doc, timeout=30.0)
        external = sorted((a.spans[0].start, a.spans[0].end) for a in added)
        builtin = sorted((span.start, span.end) for span, _ in tokenize(text))
        assert external == builtin, f"tokenizer mismatch on {text!r}"
        assert all(a.ann_type == "token" for a in added)

    for name, body in FAULT_BODIES.items():
        script = tmp_path / f"{name}.py"
        script.write_text(body, "utf-8")
        faulty = load_descriptor(
            {
                "name": "faulty",
                "coupling": "external",
                "command": [sys.executable, str(script)],
                "post": [{"type": "token"}],
            }
        )
        engine = PipelineEngine(Registry([faulty]), timeout=15.0)
        doc = Document("d", "some text to mangle.")
        report = engine.run(Pipeline("p", [Stage("faulty")]), doc)
        assert report.stages[0].status == "failed", name
        assert doc.get_annotations() == [], name
        assert doc.next_id == 1, name


# -- criterion: planner verdicts on stage order -------------------------


def test_planner_verdicts_on_stage_order():
    engine = standard_engine()

    rejected = engine.plan(load_pipeline({"stages": ["tagger", "tokenizer"]}))
    assert not rejected.ok
    assert [p.message for p in rejected.problems] == [
        "stage 0 (tagger): no earlier stage or input provides 'token'"
    ]

    accepted = engine.plan(
        load_pipeline({"stages": ["tokenizer", "tagger", "gazetteer", "splitter"]})
    )
    assert accepted.ok
    assert accepted.problems == []
