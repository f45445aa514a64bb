"""Solver handles: one query interface over the three prediction back-ends.

A handle answers `query(scene, true_type, candidates)` with a QueryResult.
The embedding handle applies the graph-filtered protocol; the rule and
co-occurrence handles rank over the type vocabulary directly (their rankings
already exclude observed types) with unranked candidates counted
pessimistically.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .cooccur import CooccurrenceModel, predict_cc_iterative
from .graph import KnowledgeGraph, SceneRecord
from .kge.models import EmbeddingModel
from .kge.rank import filtered_ranking
from .metrics import NO_PREDICTION, QueryResult, pessimistic_rank
from .rules import RuleSet, predict_arm


class KgeSolver:
    def __init__(self, model: EmbeddingModel, graph: KnowledgeGraph, relation: int):
        self.model = model
        self.graph = graph
        self.relation = relation
        self.name = model.kind

    def rank(self, scene: SceneRecord, candidates: Sequence[int]):
        from .kge.rank import predict_tail

        return predict_tail(self.model, self.graph, scene.scene_id, self.relation, candidates)

    def query(self, scene: SceneRecord, true_type: int, candidates: Sequence[int]) -> QueryResult:
        rank, ranking = filtered_ranking(
            self.model, self.graph, (scene.scene_id, self.relation, true_type), candidates
        )
        return QueryResult(rank=rank, top1=ranking[0][0] if ranking else NO_PREDICTION)


class RuleSolver:
    name = "arm"

    def __init__(self, ruleset: RuleSet):
        self.ruleset = ruleset

    def rank(self, scene: SceneRecord, candidates: Sequence[int]):
        return predict_arm(self.ruleset, scene.observed)

    def query(self, scene: SceneRecord, true_type: int, candidates: Sequence[int]) -> QueryResult:
        return pessimistic_rank(self.rank(scene, candidates), true_type, candidates)


class CooccurSolver:
    name = "cc"

    def __init__(self, model: CooccurrenceModel, max_iters: int = 10, n_slots: int | None = None):
        self.model = model
        self.max_iters = max_iters
        self.n_slots = n_slots  # None: one slot per masked type of the scene

    def rank(self, scene: SceneRecord, candidates: Sequence[int]):
        slots = self.n_slots if self.n_slots is not None else max(1, len(scene.masked))
        return predict_cc_iterative(self.model, scene.observed, slots, self.max_iters)

    def query(self, scene: SceneRecord, true_type: int, candidates: Sequence[int]) -> QueryResult:
        return pessimistic_rank(self.rank(scene, candidates), true_type, candidates)


class RandomSolver:
    """Uniform-random baseline: a fresh random permutation per query."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def rank(self, scene: SceneRecord, candidates: Sequence[int]):
        order = list(candidates)
        self.rng.shuffle(order)
        return [(c, float(len(order) - i)) for i, c in enumerate(order)]

    def query(self, scene: SceneRecord, true_type: int, candidates: Sequence[int]) -> QueryResult:
        return pessimistic_rank(self.rank(scene, candidates), true_type, candidates)


class OracleSolver:
    """Perfect solver for harness tests: always puts the truth first."""

    name = "oracle"

    def query(self, scene: SceneRecord, true_type: int, candidates: Sequence[int]) -> QueryResult:
        return QueryResult(rank=1, top1=true_type)
