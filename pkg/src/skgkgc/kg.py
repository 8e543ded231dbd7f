"""Knowledge graph data model, TSV ingestion, indexes and dataset statistics."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

logger = logging.getLogger(__name__)

FOCUS_CLAMP = (0.1, 10.0)


class DataError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


class Triple(NamedTuple):
    head: str
    relation: str
    tail: str


@dataclass(frozen=True)
class EntityRecord:
    id: str
    name: str
    description: str = ""

    @property
    def text(self) -> str:
        """``name, description`` rendering (no dangling comma when empty)."""
        if self.description:
            return f"{self.name}, {self.description}"
        return self.name


@dataclass(frozen=True)
class GraphStats:
    n_entities: int
    n_relations: int
    n_train: int
    n_valid: int
    n_test: int
    share_hr: float
    share_rt: float
    avg_heads_per_rt: float
    avg_tails_per_hr: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _freeze(index: dict) -> Mapping:
    return MappingProxyType({k: frozenset(v) for k, v in index.items()})


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable graph with train-split lookup indexes.

    ``hr_index`` maps ``(head, relation)`` to the set of train tails and
    ``rt_index`` maps ``(relation, tail)`` to the set of train heads.
    ``known_index`` holds every triple of every split and backs the
    filtered evaluation setting.
    """

    entities: Mapping[str, EntityRecord]
    relations: Mapping[str, str]
    train: tuple[Triple, ...]
    valid: tuple[Triple, ...]
    test: tuple[Triple, ...]
    missing_text: int = 0
    duplicates_dropped: int = 0
    hr_index: Mapping[tuple[str, str], frozenset] = field(init=False, repr=False)
    rt_index: Mapping[tuple[str, str], frozenset] = field(init=False, repr=False)
    known_index: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        hr, rt = defaultdict(set), defaultdict(set)
        for h, r, t in self.train:
            hr[(h, r)].add(t)
            rt[(r, t)].add(h)
        object.__setattr__(self, "hr_index", _freeze(hr))
        object.__setattr__(self, "rt_index", _freeze(rt))
        object.__setattr__(
            self, "known_index", frozenset(self.train) | frozenset(self.valid) | frozenset(self.test)
        )

    @classmethod
    def from_triples(
        cls,
        entities: Iterable[EntityRecord],
        relations: Mapping[str, str],
        train: Iterable[Iterable[str]],
        valid: Iterable[Iterable[str]] = (),
        test: Iterable[Iterable[str]] = (),
    ) -> "KnowledgeGraph":
        """Build a graph in memory, filling in missing entity/relation text."""
        table = {}
        for rec in entities:
            if rec.id in table:
                raise DataError(f"duplicate entity id {rec.id!r}")
            table[rec.id] = rec
        rels = dict(relations)
        splits, dropped = [], 0
        for split in (train, valid, test):
            seen, out = set(), []
            for tr in split:
                tr = Triple(*tr)
                if tr in seen:
                    dropped += 1
                    continue
                seen.add(tr)
                out.append(tr)
            splits.append(tuple(out))
        missing = 0
        for split in splits:
            for h, r, t in split:
                for e in (h, t):
                    if e not in table:
                        table[e] = EntityRecord(e, e, "")
                        missing += 1
                rels.setdefault(r, r)
        if missing:
            logger.warning("%d entities have no text; using their ids as names", missing)
        if dropped:
            logger.warning("dropped %d duplicate triples", dropped)
        return cls(
            entities=MappingProxyType(table),
            relations=MappingProxyType(rels),
            train=splits[0],
            valid=splits[1],
            test=splits[2],
            missing_text=missing,
            duplicates_dropped=dropped,
        )

    @property
    def entity_ids(self) -> list[str]:
        """Entity ids in a stable (sorted) order."""
        return sorted(self.entities)

    @property
    def relation_ids(self) -> list[str]:
        return sorted(self.relations)

    def entity_text(self, eid: str) -> str:
        return self.entities[eid].text

    def split(self, name: str) -> tuple[Triple, ...]:
        if name in ("dev", "valid"):
            return self.valid
        if name in ("train", "test"):
            return getattr(self, name)
        raise KeyError(f"unknown split {name!r}")

    def degree(self) -> dict[str, int]:
        """Number of train triples touching each entity."""
        deg: dict[str, int] = defaultdict(int)
        for h, _, t in self.train:
            deg[h] += 1
            deg[t] += 1
        return dict(deg)


def _read_tsv(path: Path, n_fields: tuple[int, ...]) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in n_fields:
                raise DataError(
                    f"{path}:{lineno}: expected {' or '.join(map(str, n_fields))} "
                    f"tab-separated fields, got {len(parts)}"
                )
            rows.append((lineno, [p.strip() for p in parts]))
    return rows


def read_triples(path) -> list[Triple]:
    return [Triple(*parts) for _, parts in _read_tsv(Path(path), (3,))]


def read_entity_text(path) -> list[EntityRecord]:
    """Read ``id<TAB>text`` or ``id<TAB>name<TAB>description`` lines.

    Two-field text is split into name and description at the first ``", "``.
    """
    path = Path(path)
    records, seen = [], set()
    for lineno, parts in _read_tsv(path, (2, 3)):
        eid = parts[0]
        if eid in seen:
            raise DataError(f"{path}:{lineno}: duplicate entity id {eid!r}")
        seen.add(eid)
        if len(parts) == 3:
            name, desc = parts[1], parts[2]
        else:
            name, _, desc = parts[1].partition(", ")
        records.append(EntityRecord(eid, name.strip() or eid, desc.strip()))
    return records


def read_relation_text(path) -> dict[str, str]:
    path = Path(path)
    out = {}
    for lineno, (rid, text) in _read_tsv(path, (2,)):
        if rid in out:
            raise DataError(f"{path}:{lineno}: duplicate relation id {rid!r}")
        out[rid] = text
    return out


def load_graph(train_path, valid_path, test_path, entity_text_path, relation_text_path) -> KnowledgeGraph:
    for p in (train_path, valid_path, test_path, entity_text_path, relation_text_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"missing dataset file: {p}")
    return KnowledgeGraph.from_triples(
        read_entity_text(entity_text_path),
        read_relation_text(relation_text_path),
        read_triples(train_path),
        read_triples(valid_path),
        read_triples(test_path),
    )


# file names follow the KG-BERT data layout
DATA_FILES = {
    "train": "train.tsv",
    "valid": "dev.tsv",
    "test": "test.tsv",
    "entities": "entity2text.txt",
    "relations": "relation2text.txt",
}


def load_data_dir(data_dir) -> KnowledgeGraph:
    d = Path(data_dir)
    f = {k: d / v for k, v in DATA_FILES.items()}
    return load_graph(f["train"], f["valid"], f["test"], f["entities"], f["relations"])


def write_data_dir(g: KnowledgeGraph, data_dir) -> None:
    """Write a graph back out in the layout read by :func:`load_data_dir`."""
    d = Path(data_dir)
    d.mkdir(parents=True, exist_ok=True)
    for split in ("train", "valid", "test"):
        with open(d / DATA_FILES[split], "w", encoding="utf-8") as fh:
            for tr in g.split(split):
                fh.write("\t".join(tr) + "\n")
    with open(d / DATA_FILES["entities"], "w", encoding="utf-8") as fh:
        for eid in g.entity_ids:
            rec = g.entities[eid]
            fh.write(f"{eid}\t{rec.name}\t{rec.description}\n")
    with open(d / DATA_FILES["relations"], "w", encoding="utf-8") as fh:
        for rid in g.relation_ids:
            fh.write(f"{rid}\t{g.relations[rid]}\n")


def compute_stats(g: KnowledgeGraph) -> GraphStats:
    n = len(g.train)
    if n:
        share_hr = sum(len(g.hr_index[(h, r)]) >= 2 for h, r, _ in g.train) / n
        share_rt = sum(len(g.rt_index[(r, t)]) >= 2 for _, r, t in g.train) / n
        avg_tails = sum(map(len, g.hr_index.values())) / len(g.hr_index)
        avg_heads = sum(map(len, g.rt_index.values())) / len(g.rt_index)
    else:
        share_hr = share_rt = avg_tails = avg_heads = 0.0
    return GraphStats(
        n_entities=len(g.entities),
        n_relations=len(g.relations),
        n_train=n,
        n_valid=len(g.valid),
        n_test=len(g.test),
        share_hr=share_hr,
        share_rt=share_rt,
        avg_heads_per_rt=avg_heads,
        avg_tails_per_hr=avg_tails,
    )


def focusing_ratios(g: KnowledgeGraph, clamp: tuple[float, float] | None = FOCUS_CLAMP) -> tuple[float, float]:
    """Focusing parameters ``(r_head, r_tail)`` from head/tail fan-in imbalance.

    Many-to-one fan-in (many heads per ``(r, t)``) makes head prediction harder,
    so ``r_head`` is the ratio of average heads per ``(r, t)`` to average tails
    per ``(h, r)``; ``r_tail`` is its reciprocal. Pass ``clamp=None`` to disable
    clamping.
    """
    if not g.train:
        raise DataError("focusing ratios need a non-empty train split")
    st = compute_stats(g)
    r_head = st.avg_heads_per_rt / st.avg_tails_per_hr
    r_tail = st.avg_tails_per_hr / st.avg_heads_per_rt
    if clamp is not None:
        lo, hi = clamp
        r_head = min(max(r_head, lo), hi)
        r_tail = min(max(r_tail, lo), hi)
    return r_head, r_tail
