"""Shared fixtures for the test suite."""

import pytest

from standoff import AnnRef, Document, Pipeline, Stage, standard_engine


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose each phase's report on the item so teardown fixtures can see
    # whether the test body passed (used by the acceptance announcer)
    outcome = yield
    report = outcome.get_result()
    setattr(item, "report_" + report.when, report)

GOLDEN_TEXT = "Sarah savored the soup."
GOLDEN_DIGEST = "4fbc98f3f3ac660f6d57edc39d7710896cff3e569f171710745c53edf9b6ddf0"

# (id, type, spans, attributes) after running the standard four-stage chain
GOLDEN_ROWS = [
    (1, "token", ((0, 5),), {"pos": "NP"}),
    (2, "token", ((6, 13),), {"pos": "VBD"}),
    (3, "token", ((14, 17),), {"pos": "DT"}),
    (4, "token", ((18, 22),), {"pos": "NN"}),
    (5, "token", ((22, 23),), {}),
    (6, "name", ((0, 5),), {"name_type": "person"}),
    (7, "sentence", ((0, 23),), {}),
]

FULL_CHAIN = ["tokenizer", "tagger", "gazetteer", "splitter"]


def doc_rows(doc):
    """Annotations of a document as comparable (id, type, spans, attrs) rows."""
    rows = [
        (ann.id, ann.ann_type, tuple((s.start, s.end) for s in ann.spans), dict(ann.attributes))
        for ann in doc
    ]
    rows.sort(key=lambda row: row[0])
    return rows


def full_chain_pipeline(name="vie"):
    return Pipeline(name=name, stages=[Stage(module=m) for m in FULL_CHAIN])


_ALPHABET = "abc ABé 中.😀!\n<>&\"'?"
_TYPES = ("token", "name", "sentence", "note.v2")


def random_document(rng, doc_id="d"):
    """A document with random text, annotations, attributes and removals."""
    text = "".join(rng.choice(_ALPHABET) for _ in range(rng.randrange(0, 40)))
    doc = Document(doc_id, text)
    size = len(doc)
    for _ in range(rng.randrange(0, 8)):
        cuts = sorted(rng.randrange(0, size + 1) for _ in range(4))
        spans = [(cuts[0], cuts[1])]
        if cuts[2] > cuts[1] and rng.random() < 0.4:
            spans.append((cuts[2], cuts[3]))
        attrs = {}
        if rng.random() < 0.6:
            attrs["label"] = rng.choice(("NP", "x<&>\"", "中 é", ""))
        if rng.random() < 0.3:
            attrs["rank"] = rng.randrange(-5, 100)
        if doc.next_id > 1 and rng.random() < 0.3:
            attrs["parent"] = AnnRef(rng.randrange(1, doc.next_id))
        doc.add_annotation(rng.choice(_TYPES), spans, attrs)
    # removals may leave dangling references behind; persistence keeps them
    for _ in range(rng.randrange(0, 2)):
        if doc.next_id > 1:
            doc.remove_annotation(rng.randrange(1, doc.next_id))
    if rng.random() < 0.5:
        doc.attributes["origin"] = rng.choice(("test", "génération"))
    return doc


@pytest.fixture(scope="session")
def engine():
    return standard_engine()


@pytest.fixture
def golden_doc():
    return Document("fig1", GOLDEN_TEXT)
