"""Synthetic knowledge graphs whose entity descriptions carry learnable clues.

Entities are split into classes and every class into small topics. Relation
``c`` links each class-``c`` head to all members of one topic of class
``c + 1``. Heads describe the topic they seek with a token (``q<topic>``)
that differs from the membership token tails carry (``m<topic>``), so the
correspondence has to be learned: raw token overlap between a query and its
answer carries no signal.
"""

from __future__ import annotations

import numpy as np

from .kg import EntityRecord, KnowledgeGraph

CLASS_WORDS = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta")
RELATION_TEXT = ("hypernym of", "part of", "member of", "similar to", "derived from", "instance of", "has part", "cause of")
FILLER = ("stone", "river", "cloud", "paper", "window", "garden", "signal", "engine", "market", "shadow",
          "lantern", "harbor", "violin", "meadow", "circuit", "pepper", "saddle", "quartz", "tunnel", "velvet")


def clue_graph(
    n_entities: int = 200,
    n_relations: int = 5,
    topic_size: int = 5,
    n_valid: int = 100,
    n_test: int = 100,
    seed: int = 0,
    set_structured: bool = False,
    clue_keep: float = 1.0,
) -> KnowledgeGraph:
    """Build a clue graph with ``n_entities * topic_size`` triples.

    ``set_structured`` pads every description with filler sentences and
    makes a head mention its topic clue only with probability ``clue_keep``,
    so a single head's text is a weak signal while the set of heads sharing
    ``(r, t)`` still carries the clue.
    """
    if n_relations > len(CLASS_WORDS):
        raise ValueError(f"at most {len(CLASS_WORDS)} relations supported")
    rng = np.random.default_rng(seed)
    ids = [f"e{i:04d}" for i in range(n_entities)]
    classes = np.arange(n_entities) % n_relations
    topic_of = np.empty(n_entities, dtype=int)
    topics_by_class = {}
    next_topic = 0
    for c in range(n_relations):
        members = rng.permutation(np.flatnonzero(classes == c))
        chunks = [members[i : i + topic_size] for i in range(0, len(members), topic_size)]
        topics_by_class[c] = list(range(next_topic, next_topic + len(chunks)))
        for k, chunk in enumerate(chunks):
            topic_of[chunk] = next_topic + k
        next_topic += len(chunks)
    topic_members = {k: np.flatnonzero(topic_of == k) for k in range(next_topic)}

    triples = []
    sought = {}
    for h in range(n_entities):
        c = int(classes[h])
        k = int(rng.choice(topics_by_class[(c + 1) % n_relations]))
        sought[h] = k
        triples.extend((h, c, int(t)) for t in topic_members[k])

    records = []
    for i in range(n_entities):
        sents = [f"a {CLASS_WORDS[classes[i]]} item", f"it belongs with m{topic_of[i]:03d}"]
        if not set_structured or rng.random() < clue_keep:
            sents.append(f"it seeks q{sought[i]:03d}")
        if set_structured:
            fill = rng.choice(len(FILLER), size=3, replace=False)
            sents.extend(f"the {FILLER[j]} is plain" for j in fill)
        records.append(EntityRecord(ids[i], f"ent{i:04d}", ". ".join(sents)))

    rel_ids = [f"r{c}" for c in range(n_relations)]
    rels = {rel_ids[c]: RELATION_TEXT[c] for c in range(n_relations)}
    order = rng.permutation(len(triples))
    named = [(ids[h], rel_ids[c], ids[t]) for h, c, t in (triples[j] for j in order)]
    n_train = len(named) - n_valid - n_test
    return KnowledgeGraph.from_triples(
        records, rels, named[:n_train], named[n_train : n_train + n_valid], named[n_train + n_valid :]
    )
