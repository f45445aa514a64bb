"""End-to-end pipeline: reify, split, fit a solver, evaluate.

Shared by the command-line interface, the experiment scripts, and the
acceptance suite so they all run the exact same protocol: the training graph
holds every scene's observed type edges (masked edges are held out), the
candidate pool is the tail vocabulary of the scene-type relation, and each
masked type is one evaluation query.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .cooccur import train_cc
from .graph import (
    KnowledgeGraph,
    SceneRecord,
    relation_tails,
    scene_observation_graph,
    split_and_mask,
)
from .kge.train import TrainConfig, train
from .metrics import DEFAULT_KS, EvalReport, evaluate_solver
from .rules import generate_rules, mine_frequent_itemsets
from .solvers import CooccurSolver, KgeSolver, RuleSolver

SCENE_TYPE_RELATION = "includesType"

KGE_KINDS = ("transe", "hole", "convkb")
SOLVER_KINDS = KGE_KINDS + ("arm", "cc")


@dataclass
class ArmOptions:
    min_support: float = 0.05
    min_confidence: float = 0.5


@dataclass
class CcOptions:
    alpha: float = 1.0
    max_iters: int = 10


@dataclass
class PreparedData:
    graph: KnowledgeGraph
    relation: int
    observed_graph: KnowledgeGraph
    candidates: list
    train: list
    valid: list
    test: list
    flagged: list = field(default_factory=list)


def config_fingerprint(config) -> str:
    """Short stable digest of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def prepare_from_split(
    graph: KnowledgeGraph,
    train_scenes: Sequence[SceneRecord],
    test_scenes: Sequence[SceneRecord],
    valid_scenes: Sequence[SceneRecord] = (),
    relation_label: str = SCENE_TYPE_RELATION,
) -> PreparedData:
    relation = graph.relation_id(relation_label)
    everything = list(train_scenes) + list(valid_scenes) + list(test_scenes)
    observed = scene_observation_graph(graph, everything, relation)
    return PreparedData(
        graph=graph,
        relation=relation,
        observed_graph=observed,
        candidates=relation_tails(observed, relation),
        train=list(train_scenes),
        valid=list(valid_scenes),
        test=list(test_scenes),
    )


def prepare_split(
    graph: KnowledgeGraph,
    scenes: Sequence[SceneRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    k_mask: int = 1,
    seed: int = 0,
    relation_label: str = SCENE_TYPE_RELATION,
) -> PreparedData:
    split = split_and_mask(scenes, ratios, k_mask, seed)
    prepared = prepare_from_split(
        graph, split.train, split.test, split.valid, relation_label=relation_label
    )
    prepared.flagged = split.flagged
    return prepared


def fit_solver(kind: str, prepared: PreparedData, options=None, seed: int = 0):
    """Train one solver on the prepared data and wrap it as a query handle."""
    if kind in KGE_KINDS:
        config = options if isinstance(options, TrainConfig) else TrainConfig()
        config = replace(
            config,
            model_kind=kind,
            seed=seed,
            target_relation=prepared.relation,
            negative_pool="target-tails",
        )
        model = train(prepared.observed_graph, config)
        return KgeSolver(model, prepared.observed_graph, prepared.relation)
    if kind == "arm":
        opts = options or ArmOptions()
        transactions = [rec.observed for rec in prepared.train]
        frequent = mine_frequent_itemsets(transactions, opts.min_support)
        ruleset = generate_rules(frequent, len(transactions), opts.min_confidence)
        return RuleSolver(ruleset)
    if kind == "cc":
        opts = options or CcOptions()
        model = train_cc(prepared.train, alpha=opts.alpha, type_vocab=prepared.candidates)
        return CooccurSolver(model, max_iters=opts.max_iters)
    raise ValueError(f"unknown solver kind {kind!r}, expected one of {SOLVER_KINDS}")


def run_single(
    kind: str,
    prepared: PreparedData,
    options=None,
    seed: int = 0,
    ks: Sequence[int] = DEFAULT_KS,
    fingerprint: str = "",
    eval_scenes: Sequence[SceneRecord] | None = None,
) -> EvalReport:
    solver = fit_solver(kind, prepared, options, seed)
    scenes = list(eval_scenes) if eval_scenes is not None else [
        rec for rec in prepared.test if rec.masked
    ]
    return evaluate_solver(
        solver,
        scenes,
        prepared.candidates,
        ks=ks,
        solver_id=kind,
        fingerprint=fingerprint,
        seed=seed,
    )


def run_repeats(
    kind: str,
    prepared: PreparedData,
    options=None,
    seed: int = 0,
    repeats: int = 1,
    ks: Sequence[int] = DEFAULT_KS,
    fingerprint: str = "",
) -> list:
    """Re-run training and evaluation with seeds seed .. seed+repeats-1 on
    fixed data."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    return [
        run_single(kind, prepared, options, seed=seed + i, ks=ks, fingerprint=fingerprint)
        for i in range(repeats)
    ]


def _mean_std(values: Sequence[float]) -> dict:
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return {"mean": mean, "std": std, "values": list(values)}


def aggregate_reports(reports: Sequence[EvalReport]) -> dict:
    """Per-metric mean and sample standard deviation across repeated runs."""
    if not reports:
        raise ValueError("no reports to aggregate")
    metrics: dict = {
        "mrr": [r.mrr for r in reports],
        "kep_accuracy": [r.kep_accuracy for r in reports],
        "micro_f1": [r.micro_f1 for r in reports],
        "macro_f1": [r.macro_f1 for r in reports],
    }
    for k in sorted(reports[0].hits):
        metrics[f"hits@{k}"] = [r.hits[k] for r in reports]
    return {name: _mean_std(values) for name, values in metrics.items()}
