"""Ranking metrics, top-1 classification metrics, and the evaluation loop.

Every (scene, masked type) pair is one query. A solver handle answers a query
with a rank and a top-1 prediction over the candidate types not excluded by
mutual filtering; this module aggregates mean reciprocal rank, hits@K, top-1
accuracy and micro/macro F1 into one report.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

# Sentinel "no prediction" class used when a solver returns an empty ranking.
NO_PREDICTION = -1

DEFAULT_KS = (1, 3, 10)


def ranking_metrics(ranks: Sequence[int], ks: Sequence[int] = DEFAULT_KS) -> tuple[float, dict]:
    """Mean reciprocal rank and hits@K over positive integer ranks."""
    if not ranks:
        raise ValueError("ranks must be non-empty")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks must all be >= 1")
    n = len(ranks)
    mrr = sum(1.0 / r for r in ranks) / n
    hits = {k: sum(1 for r in ranks if r <= k) / n for k in ks}
    return mrr, hits


def kep_metrics(pairs: Sequence[tuple[int, int]]) -> tuple[float, float, float, list]:
    """Top-1 exact-match metrics over (predicted type, true type) pairs.

    Returns (accuracy percent, micro F1, macro F1, per-class table). Each
    query is a single-label multi-class decision, so micro F1 equals
    accuracy/100. Per-class precision is TP/(TP+FP) and recall TP/(TP+FN)
    (0 when the denominator is 0); classes with neither true nor predicted
    instances are excluded from the macro average.
    """
    if not pairs:
        raise ValueError("predictions must be non-empty")
    tp: dict = {}
    fp: dict = {}
    fn: dict = {}
    correct = 0
    for pred, true in pairs:
        if pred == true:
            correct += 1
            tp[true] = tp.get(true, 0) + 1
        else:
            fp[pred] = fp.get(pred, 0) + 1
            fn[true] = fn.get(true, 0) + 1
    frac = correct / len(pairs)
    accuracy = 100.0 * frac
    micro_f1 = frac  # precision == recall == accuracy for single-label queries

    table = []
    f1_sum = 0.0
    classes = sorted(set(tp) | set(fp) | set(fn))
    for cls in classes:
        tp_c, fp_c, fn_c = tp.get(cls, 0), fp.get(cls, 0), fn.get(cls, 0)
        precision = tp_c / (tp_c + fp_c) if tp_c + fp_c else 0.0
        recall = tp_c / (tp_c + fn_c) if tp_c + fn_c else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1_sum += f1
        table.append(
            {
                "class": cls,
                "tp": tp_c,
                "fp": fp_c,
                "fn": fn_c,
                "precision": precision,
                "recall": recall,
                "f1": f1,
            }
        )
    macro_f1 = f1_sum / len(classes) if classes else 0.0
    return accuracy, micro_f1, macro_f1, table


@dataclass
class QueryResult:
    rank: int
    top1: int  # NO_PREDICTION when the solver produced nothing
    flagged: bool = False


def pessimistic_rank(
    ranking: Sequence[tuple[int, float]],
    true_type: int,
    candidates: Sequence[int],
) -> QueryResult:
    """Rank of the true type treating unranked candidates as minus infinity.

    Score ties against the true type count as worse. A completely empty
    ranking yields rank |candidates| + 1 and is flagged.
    """
    cand = set(candidates)
    scored = {c: s for c, s in ranking if c in cand}
    if not scored:
        return QueryResult(rank=len(cand) + 1, top1=NO_PREDICTION, flagged=True)
    top1 = min(scored, key=lambda c: (-scored[c], c))
    if true_type not in scored:
        # the truth ties with the other unranked candidates and loses the ties
        return QueryResult(rank=len(cand), top1=top1)
    s_true = scored[true_type]
    above = sum(1 for c, s in scored.items() if c != true_type and s >= s_true)
    return QueryResult(rank=1 + above, top1=top1)


@dataclass
class EvalReport:
    solver: str
    mrr: float
    hits: dict
    kep_accuracy: float  # percent
    micro_f1: float
    macro_f1: float
    per_class: list
    n_queries: int
    n_flagged: int
    config_fingerprint: str = ""
    seed: int | None = None
    wall_clock_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "kep_accuracy": self.kep_accuracy,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "per_class": self.per_class,
            "n_queries": self.n_queries,
            "n_flagged": self.n_flagged,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "wall_clock_ms": self.wall_clock_ms,
        }


def evaluate_solver(
    solver,
    scenes: Sequence,
    candidates: Sequence[int],
    ks: Sequence[int] = DEFAULT_KS,
    solver_id: str = "",
    fingerprint: str = "",
    seed: int | None = None,
) -> EvalReport:
    """Run every (scene, masked type) query through a solver handle.

    For each query the other masked types of the same scene are removed from
    the candidate pool (mutual filtering); the handle then applies its own
    protocol (graph-filtered ranking for embedding solvers, raw ranking over
    the type vocabulary otherwise).
    """
    started = time.perf_counter()
    ranks: list[int] = []
    pairs: list[tuple[int, int]] = []
    n_flagged = 0
    cand_set = set(candidates)
    for scene in scenes:
        if not scene.masked:
            raise ValueError(f"scene {scene.scene_id} has no masked types to evaluate")
        for true_type in sorted(scene.masked):
            pool = [c for c in candidates if c == true_type or c not in scene.masked]
            if true_type not in cand_set:
                # unanswerable: the held-out type is outside the vocabulary
                ranks.append(len(pool) + 1)
                pairs.append((NO_PREDICTION, true_type))
                n_flagged += 1
                continue
            result = solver.query(scene, true_type, pool)
            ranks.append(result.rank)
            pairs.append((result.top1, true_type))
            if result.flagged:
                n_flagged += 1
    mrr, hits = ranking_metrics(ranks, ks)
    accuracy, micro_f1, macro_f1, table = kep_metrics(pairs)
    return EvalReport(
        solver=solver_id or getattr(solver, "name", type(solver).__name__),
        mrr=mrr,
        hits=hits,
        kep_accuracy=accuracy,
        micro_f1=micro_f1,
        macro_f1=macro_f1,
        per_class=table,
        n_queries=len(ranks),
        n_flagged=n_flagged,
        config_fingerprint=fingerprint,
        seed=seed,
        wall_clock_ms=(time.perf_counter() - started) * 1000.0,
    )
