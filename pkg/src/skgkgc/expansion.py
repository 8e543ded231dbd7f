"""Dataset-level expansion with entity-set examples.

Train triples sharing a ``(relation, tail)`` key form a head-entity set whose
summarized text becomes an extra tail-prediction example; triples sharing a
``(head, relation)`` key symmetrically yield head-prediction examples.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .kg import KnowledgeGraph
from .summarize import DAMPING, SentenceGraph, split_sentences, textrank_scores, top_sentences

HEAD = "head"
TAIL = "tail"
PSEP = "[PSEP]"
SEP = "[SEP]"
MAX_GROUP = 10


@dataclass(frozen=True)
class ExpandedExample:
    direction: str  # which side is predicted: HEAD or TAIL
    known_text: str
    target: str
    relation: str
    group_members: tuple[str, ...] = field(default_factory=tuple)

    @property
    def is_set_example(self) -> bool:
        return len(self.group_members) >= 2

    def to_json(self) -> dict:
        d = asdict(self)
        d["members"] = list(d.pop("group_members"))
        return d


def _entity_str(name: str, desc: str) -> str:
    return f"{name}, {desc}" if desc else name


def build_known_text(names_and_descs, relation_text: str, other_entity_text: str | None = None) -> str:
    """Render ``name, desc [PSEP] name, desc [SEP] relation [SEP] other``."""
    if not names_and_descs:
        raise ValueError("need at least one entity")
    text = f" {PSEP} ".join(_entity_str(n, d) for n, d in names_and_descs)
    text += f" {SEP} {relation_text}"
    if other_entity_text:
        text += f" {SEP} {other_entity_text}"
    return text


def summarize_group(names_and_descs, top_n: int, damping: float = DAMPING) -> list[tuple[str, str]]:
    """Keep the ``top_n`` best sentences across all member descriptions.

    Ranking runs over the pooled sentences of every member; each member keeps
    its name and whichever of its own sentences survive, in original order.
    """
    per_member = [split_sentences(d) for _, d in names_and_descs]
    flat = [(k, s) for k, sents in enumerate(per_member) for s in sents]
    if len(flat) <= top_n:
        return list(names_and_descs)
    scores = textrank_scores(SentenceGraph.from_sentences([s for _, s in flat], damping))
    keep = set(top_sentences(scores, top_n))
    out = []
    for k, (name, _) in enumerate(names_and_descs):
        kept = [s for i, (owner, s) in enumerate(flat) if owner == k and i in keep]
        out.append((name, ". ".join(kept)))
    return out


def _cap_members(members, degree, cap, position):
    """Keep at most ``cap`` members (highest degree, then id), listed in train-file order."""
    if cap is not None and len(members) > cap:
        members = sorted(members, key=lambda e: (-degree.get(e, 0), e))[:cap]
    return sorted(members, key=position)


def original_examples(g: KnowledgeGraph) -> list[ExpandedExample]:
    out = []
    for h, r, t in g.train:
        rel = g.relations[r]
        eh, et = g.entities[h], g.entities[t]
        out.append(ExpandedExample(HEAD, build_known_text([(et.name, et.description)], rel), h, r, (t,)))
        out.append(ExpandedExample(TAIL, build_known_text([(eh.name, eh.description)], rel), t, r, (h,)))
    return out


def set_examples(
    g: KnowledgeGraph,
    top_n: int = 3,
    min_group_size: int = 2,
    max_group: int | None = MAX_GROUP,
    damping: float = DAMPING,
) -> list[ExpandedExample]:
    if min_group_size < 2:
        raise ValueError("min_group_size must be >= 2")
    degree = g.degree()
    first_seen = {}
    for i, (h, r, t) in enumerate(g.train):
        first_seen.setdefault((TAIL, r, t, h), i)
        first_seen.setdefault((HEAD, h, r, t), i)
    out = []

    def make(direction, members, target, r):
        if direction == TAIL:
            position = lambda m: first_seen[(TAIL, r, target, m)]  # noqa: E731
        else:
            position = lambda m: first_seen[(HEAD, target, r, m)]  # noqa: E731
        members = _cap_members(members, degree, max_group, position)
        nd = [(g.entities[e].name, g.entities[e].description) for e in members]
        nd = summarize_group(nd, top_n, damping)
        text = build_known_text(nd, g.relations[r])
        return ExpandedExample(direction, text, target, r, tuple(members))

    # head sets sharing (r, t) feed tail prediction of t
    for (r, t) in sorted(g.rt_index):
        heads = g.rt_index[(r, t)]
        if len(heads) >= min_group_size:
            out.append(make(TAIL, heads, t, r))
    # tail sets sharing (h, r) feed head prediction of h
    for (h, r) in sorted(g.hr_index):
        tails = g.hr_index[(h, r)]
        if len(tails) >= min_group_size:
            out.append(make(HEAD, tails, h, r))
    return out


def expand_dataset(
    g: KnowledgeGraph,
    top_n: int = 3,
    min_group_size: int = 2,
    max_group: int | None = MAX_GROUP,
    damping: float = DAMPING,
) -> list[ExpandedExample]:
    """Original head/tail examples for every train triple followed by set examples."""
    return original_examples(g) + set_examples(g, top_n, min_group_size, max_group, damping)


def known_answers(g: KnowledgeGraph, ex: ExpandedExample) -> frozenset:
    """Every train entity that correctly completes the example's query.

    Used to mask false in-batch negatives during training.
    """
    answers = set()
    for m in ex.group_members:
        if ex.direction == TAIL:
            answers |= g.hr_index.get((m, ex.relation), frozenset())
        else:
            answers |= g.rt_index.get((ex.relation, m), frozenset())
    answers.add(ex.target)
    return frozenset(answers)
