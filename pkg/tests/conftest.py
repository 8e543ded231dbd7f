import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skgkgc.kg import EntityRecord, KnowledgeGraph  # noqa: E402
from skgkgc.synthetic import clue_graph  # noqa: E402


def make_graph(train, valid=(), test=(), texts=None, relations=None):
    ents = set()
    for split in (train, valid, test):
        for h, _, t in split:
            ents.update((h, t))
    texts = texts or {}
    records = [EntityRecord(e, *texts.get(e, (f"name {e}", f"about {e}"))) for e in sorted(ents)]
    rels = relations or {r: f"rel {r}" for _, r, _ in list(train) + list(valid) + list(test)}
    return KnowledgeGraph.from_triples(records, rels, train, valid, test)


@pytest.fixture
def toy_graph():
    # two triples share (a, r1); c and d are distinct
    return make_graph(
        [("a", "r1", "b"), ("a", "r1", "c"), ("c", "r2", "d"), ("d", "r1", "b")],
        valid=[("b", "r2", "a")],
        test=[("d", "r2", "a")],
    )


@pytest.fixture(scope="session")
def synthetic_graph():
    return clue_graph()


@pytest.fixture(scope="session")
def small_synthetic():
    return clue_graph(n_entities=40, n_relations=4, topic_size=3, n_valid=12, n_test=12, seed=3)


@pytest.fixture
def data_dir(tmp_path):
    """Tiny dataset directory in the KG-BERT file layout."""
    d = tmp_path / "data"
    d.mkdir()
    (d / "train.tsv").write_text("a\tr1\tb\na\tr1\tc\nc\tr2\td\nd\tr1\tb\n")
    (d / "dev.tsv").write_text("b\tr2\ta\n")
    (d / "test.tsv").write_text("d\tr2\ta\n")
    (d / "entity2text.txt").write_text(
        "a\tapple, a red fruit\nb\tbanana, a long yellow fruit\nc\tcherry, a small stone fruit\nd\tdate, a sweet fruit\n"
    )
    (d / "relation2text.txt").write_text("r1\tsimilar to\nr2\tpart of\n")
    return d


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
