"""Dictionary-encoded knowledge graph and per-scene observation records.

The graph stores opaque string labels for nodes and relations, maps them to
dense integer ids in first-appearance order, and keeps (head, relation, tail)
triples both as an ordered, de-duplicated tuple (so serialization round-trips
reproduce the exact same vocabulary) and as a frozenset for membership tests.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Triple = tuple[int, int, int]
LabelTriple = tuple[str, str, str]

# Ordered (entity-type id, score) pairs, best first: the common solver output.
RankedPrediction = list[tuple[int, float]]


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable dictionary-encoded triple store with (head, relation) and
    (tail, relation) indexes. Construct via :func:`build_graph`."""

    node_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    triples: tuple[Triple, ...]
    node_ids: dict = field(compare=False, repr=False)
    relation_ids: dict = field(compare=False, repr=False)
    triple_set: frozenset = field(compare=False, repr=False)
    index_hr: dict = field(compare=False, repr=False)
    index_tr: dict = field(compare=False, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    @property
    def n_triples(self) -> int:
        return len(self.triples)

    def node_id(self, label: str) -> int:
        try:
            return self.node_ids[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def relation_id(self, label: str) -> int:
        try:
            return self.relation_ids[label]
        except KeyError:
            raise KeyError(f"unknown relation label {label!r}") from None

    def has(self, head: int, relation: int, tail: int) -> bool:
        return (head, relation, tail) in self.triple_set

    def tails(self, head: int, relation: int) -> frozenset:
        return self.index_hr.get((head, relation), frozenset())

    def heads(self, tail: int, relation: int) -> frozenset:
        return self.index_tr.get((tail, relation), frozenset())

    def label_triples(self) -> list[LabelTriple]:
        """Triples as label strings, in stored (insertion) order."""
        nl, rl = self.node_labels, self.relation_labels
        return [(nl[h], rl[r], nl[t]) for h, r, t in self.triples]


def _assemble(
    node_labels: Sequence[str],
    relation_labels: Sequence[str],
    ordered_triples: Iterable[Triple],
) -> KnowledgeGraph:
    """Build a graph from pre-encoded triples, de-duplicating while keeping
    first-occurrence order and populating both indexes."""
    node_labels = tuple(node_labels)
    relation_labels = tuple(relation_labels)
    n, m = len(node_labels), len(relation_labels)
    seen: set = set()
    kept: list[Triple] = []
    index_hr: dict = {}
    index_tr: dict = {}
    for trip in ordered_triples:
        h, r, t = trip
        if not (0 <= h < n and 0 <= t < n):
            raise ValueError(f"node id out of range in triple {trip}")
        if not 0 <= r < m:
            raise ValueError(f"relation id out of range in triple {trip}")
        if trip in seen:
            continue
        seen.add(trip)
        kept.append(trip)
        index_hr.setdefault((h, r), set()).add(t)
        index_tr.setdefault((t, r), set()).add(h)
    return KnowledgeGraph(
        node_labels=node_labels,
        relation_labels=relation_labels,
        triples=tuple(kept),
        node_ids={lab: i for i, lab in enumerate(node_labels)},
        relation_ids={lab: i for i, lab in enumerate(relation_labels)},
        triple_set=frozenset(kept),
        index_hr={k: frozenset(v) for k, v in index_hr.items()},
        index_tr={k: frozenset(v) for k, v in index_tr.items()},
    )


def build_graph(triples: Iterable[LabelTriple]) -> KnowledgeGraph:
    """Encode label triples into a graph.

    Vocabularies are assigned in first-appearance order (head before tail
    within each triple); duplicate triples are dropped. An empty input yields
    an empty graph.
    """
    node_ids: dict = {}
    relation_ids: dict = {}
    node_labels: list[str] = []
    relation_labels: list[str] = []
    encoded: list[Triple] = []

    def node(label: str) -> int:
        i = node_ids.get(label)
        if i is None:
            i = len(node_labels)
            node_ids[label] = i
            node_labels.append(label)
        return i

    for trip in triples:
        h, r, t = trip
        for lab in (h, r, t):
            if not isinstance(lab, str) or not lab:
                raise ValueError(f"labels must be non-empty strings, got {trip!r}")
        hi = node(h)
        ri = relation_ids.get(r)
        if ri is None:
            ri = len(relation_labels)
            relation_ids[r] = ri
            relation_labels.append(r)
        ti = node(t)
        encoded.append((hi, ri, ti))
    return _assemble(node_labels, relation_labels, encoded)


def reify_includes_type(
    g: KnowledgeGraph,
    includes_rel: int,
    type_rel: int,
    out_rel_label: str = "includesType",
) -> KnowledgeGraph:
    """Collapse the two-hop pattern head-includes-x, x-type-tail into one
    direct (head, out_rel, tail) triple per distinct (head, tail) pair.

    Non-destructive (original triples are kept) and idempotent: running the
    join twice adds nothing new.
    """
    for rel in (includes_rel, type_rel):
        if not 0 <= rel < g.n_relations:
            raise ValueError(f"unknown relation id {rel} (graph has {g.n_relations} relations)")
    relation_labels = list(g.relation_labels)
    out_id = g.relation_ids.get(out_rel_label)
    if out_id is None:
        out_id = len(relation_labels)
        relation_labels.append(out_rel_label)
    seen = set(g.triple_set)
    added: list[Triple] = []
    for h, r, t in g.triples:
        if r != includes_rel:
            continue
        for cls in sorted(g.tails(t, type_rel)):
            trip = (h, out_id, cls)
            if trip not in seen:
                seen.add(trip)
                added.append(trip)
    return _assemble(g.node_labels, relation_labels, list(g.triples) + added)


@dataclass(frozen=True)
class SceneRecord:
    """One scene's observed entity-type ids plus the types held out for
    evaluation (empty at inference time)."""

    scene_id: int
    observed: frozenset
    masked: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "observed", frozenset(self.observed))
        object.__setattr__(self, "masked", frozenset(self.masked))
        overlap = self.observed & self.masked
        if overlap:
            raise ValueError(f"scene {self.scene_id}: observed/masked overlap {sorted(overlap)}")


def extract_scenes(g: KnowledgeGraph, includes_type_rel: int) -> list[SceneRecord]:
    """One record per distinct head of the given relation, observed = all its
    tails. A relation with no triples yields an empty list."""
    grouped: dict = {}
    for h, r, t in g.triples:
        if r == includes_type_rel:
            grouped.setdefault(h, set()).add(t)
    return [SceneRecord(h, frozenset(grouped[h])) for h in sorted(grouped)]


@dataclass
class SplitResult:
    train: list
    valid: list
    test: list
    flagged: list  # scene ids in valid/test with too few types to mask

    def summary(self) -> dict:
        return {
            "n_train": len(self.train),
            "n_valid": len(self.valid),
            "n_test": len(self.test),
            "n_flagged": len(self.flagged),
            "flagged_scene_ids": list(self.flagged),
        }


def split_and_mask(
    scenes: Sequence[SceneRecord],
    ratios: tuple[float, float, float],
    k_mask: int,
    seed: int,
) -> SplitResult:
    """Deterministically shuffle scenes, split by ratios and hide k types per
    valid/test scene.

    Train/valid sizes are floor(ratio * n), the remainder goes to test. In
    valid/test scenes min(k_mask, |observed|-1) uniformly chosen types move
    from observed to masked, always leaving at least one observed type; scenes
    with fewer than 2 observed types are emitted unmasked and flagged.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative fractions, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    if k_mask < 1:
        raise ValueError(f"k_mask must be >= 1, got {k_mask}")
    for rec in scenes:
        if rec.masked:
            raise ValueError(f"scene {rec.scene_id} already has masked types")

    rng = random.Random(seed)
    order = list(scenes)
    rng.shuffle(order)
    n = len(order)
    n_train = int(n * ratios[0])
    n_valid = int(n * ratios[1])
    train = order[:n_train]
    valid_in = order[n_train:n_train + n_valid]
    test_in = order[n_train + n_valid:]

    flagged: list[int] = []

    def mask(rec: SceneRecord) -> SceneRecord:
        if len(rec.observed) < 2:
            flagged.append(rec.scene_id)
            return rec
        k = min(k_mask, len(rec.observed) - 1)
        picks = frozenset(rng.sample(sorted(rec.observed), k))
        return SceneRecord(rec.scene_id, rec.observed - picks, picks)

    valid = [mask(rec) for rec in valid_in]
    test = [mask(rec) for rec in test_in]
    return SplitResult(train=train, valid=valid, test=test, flagged=flagged)


def relation_tails(g: KnowledgeGraph, relation: int) -> list[int]:
    """Sorted distinct tail ids of a relation: the candidate type vocabulary
    when applied to the reified scene-type relation."""
    return sorted({t for _, r, t in g.triples if r == relation})


def scene_observation_graph(
    g: KnowledgeGraph,
    scenes: Sequence[SceneRecord],
    relation: int,
) -> KnowledgeGraph:
    """Graph over the same vocabularies holding exactly the observed
    (scene, relation, type) edges of the given records.

    This is the leak-free training/filtering graph: masked types contribute
    no edges.
    """
    if not 0 <= relation < g.n_relations:
        raise ValueError(f"unknown relation id {relation}")
    ordered: list[Triple] = []
    for rec in scenes:
        for t in sorted(rec.observed):
            ordered.append((rec.scene_id, relation, t))
    return _assemble(g.node_labels, g.relation_labels, ordered)
