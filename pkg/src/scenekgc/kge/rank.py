"""Tail prediction and filtered ranking over a candidate set."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..graph import KnowledgeGraph, RankedPrediction, Triple
from .models import EmbeddingModel, score_batch


def predict_tail(
    model: EmbeddingModel,
    g: KnowledgeGraph,
    head: int,
    relation: int,
    candidates: Sequence[int],
) -> RankedPrediction:
    """Score every candidate tail for (head, relation, ?) and sort best first,
    breaking score ties by ascending entity id."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    model.check_entity(head)
    model.check_relation(relation)
    for c in candidates:
        model.check_entity(c)
    cand = np.asarray(candidates, dtype=np.int64)
    scores = score_batch(
        model,
        np.full(len(cand), head, dtype=np.int64),
        np.full(len(cand), relation, dtype=np.int64),
        cand,
    )
    order = sorted(range(len(cand)), key=lambda i: (-scores[i], cand[i]))
    return [(int(cand[i]), float(scores[i])) for i in order]


def filtered_ranking(
    model: EmbeddingModel,
    g: KnowledgeGraph,
    test_triple: Triple,
    candidates: Sequence[int],
) -> tuple[int, RankedPrediction]:
    """Filtered rank of the true tail plus the filtered candidate ranking.

    Every candidate other than the true tail that already forms a known
    triple (head, relation, candidate) in the graph is removed before
    ranking. Rank 1 is best; score ties against the true tail count as worse.
    """
    h, r, t_true = test_triple
    if t_true not in set(candidates):
        raise ValueError(f"true tail {t_true} is not among the candidates")
    kept = [c for c in candidates if c == t_true or not g.has(h, r, c)]
    ranking = predict_tail(model, g, h, r, kept)
    true_score = next(s for c, s in ranking if c == t_true)
    rank = 1 + sum(1 for c, s in ranking if c != t_true and s >= true_score)
    return rank, ranking


def rank_filtered(
    model: EmbeddingModel,
    g: KnowledgeGraph,
    test_triple: Triple,
    candidates: Sequence[int],
) -> int:
    rank, _ = filtered_ranking(model, g, test_triple, candidates)
    return rank
