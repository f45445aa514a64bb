"""Margin-ranking training with analytic gradients and plain SGD.

All three model kinds share one loss, L = sum_i max(0, margin - s(pos_i)
+ s(neg_i)), with negatives drawn by corrupting the tail of each positive.
Single-threaded runs are bit-deterministic in (seed, config, data).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..graph import KnowledgeGraph, Triple, relation_tails
from .models import (
    EmbeddingModel,
    circular_convolution,
    circular_correlation,
    convkb_preactivations,
    init_model,
    score_batch,
)

NEGATIVE_POOLS = ("entities", "target-tails")


class TrainingDivergedError(RuntimeError):
    """Raised when an epoch produces a non-finite mean loss."""


@dataclass
class TrainConfig:
    model_kind: str = "transe"
    dim: int = 100
    epochs: int = 300
    batch_size: int = 256
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives_per_positive: int = 1
    seed: int = 0
    target_relation: int | None = None  # restrict training triples when set
    norm_kind: str = "l2"
    tau: int = 64
    corrupt_heads: bool = False  # never applied to the target relation
    negative_pool: str = "entities"
    # translation models always re-normalize entity rows after each epoch;
    # None inherits that default, True/False forces the behaviour per kind
    unit_norm_entities: bool | None = None
    # decoupled shrinkage applied in the update step (theta *= 1 - lr*decay);
    # the reported loss stays the plain margin ranking loss
    weight_decay: float = 0.0
    # "sgd" is the plain default; "adagrad" rescales each parameter's step by
    # its accumulated gradient history, which copes with the huge degree
    # imbalance between type rows and scene rows in reified scene graphs
    optimizer: str = "sgd"
    # Polyak-style iterate averaging: the returned parameters are the mean of
    # the end-of-epoch parameters over the last N epochs (0 disables). Cuts
    # the SGD jitter out of the final embeddings without touching the loss.
    average_last_epochs: int = 0

    def validate(self) -> None:
        for name in ("dim", "epochs", "batch_size", "negatives_per_positive", "tau"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.margin <= 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.negative_pool not in NEGATIVE_POOLS:
            raise ValueError(
                f"negative_pool must be one of {NEGATIVE_POOLS}, got {self.negative_pool!r}"
            )
        if self.negative_pool == "target-tails" and self.target_relation is None:
            raise ValueError("negative_pool 'target-tails' requires target_relation")
        if self.model_kind == "transe" and self.unit_norm_entities is False:
            raise ValueError("translation models always re-normalize entity vectors")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.optimizer not in ("sgd", "adagrad"):
            raise ValueError(f"optimizer must be 'sgd' or 'adagrad', got {self.optimizer!r}")
        if not 0 <= self.average_last_epochs <= self.epochs:
            raise ValueError(
                f"average_last_epochs must be in [0, epochs], got {self.average_last_epochs}"
            )


def negative_sample(
    g: KnowledgeGraph,
    positive: Triple,
    rng: np.random.Generator,
    pool: Sequence[int] | None = None,
    corrupt_head: bool = False,
) -> Triple:
    """Corrupt one side of a positive triple by rejection sampling.

    The replacement is uniform over `pool` (all entities when None); draws
    that reproduce a triple already in the graph are rejected, up to 100
    attempts, after which the last draw is accepted.
    """
    h, r, t = positive
    candidates = pool if pool is not None else range(g.n_nodes)
    n = len(candidates) if pool is not None else g.n_nodes
    trip = positive
    for _ in range(100):
        pick = candidates[int(rng.integers(n))] if pool is not None else int(rng.integers(n))
        trip = (pick, r, t) if corrupt_head else (h, r, pick)
        if trip not in g.triple_set:
            return trip
    return trip


def _grads_transe(model, idx, coef, grads):
    E, R = model.entity_vectors, model.relation_vectors
    U = E[idx[:, 0]] + R[idx[:, 1]] - E[idx[:, 2]]
    if model.norm_kind == "l2":
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        direction = np.divide(U, norms, out=np.zeros_like(U), where=norms > 1e-12)
    else:
        direction = np.sign(U)
    contrib = coef[:, None] * -direction  # d score / d head = -direction
    np.add.at(grads["entity_vectors"], idx[:, 0], contrib)
    np.add.at(grads["relation_vectors"], idx[:, 1], contrib)
    np.add.at(grads["entity_vectors"], idx[:, 2], -contrib)


def _grads_hole(model, idx, coef, grads):
    E, R = model.entity_vectors, model.relation_vectors
    H, Rv, T = E[idx[:, 0]], R[idx[:, 1]], E[idx[:, 2]]
    c = coef[:, None]
    np.add.at(grads["entity_vectors"], idx[:, 0], c * circular_correlation(Rv, T))
    np.add.at(grads["relation_vectors"], idx[:, 1], c * circular_correlation(H, T))
    np.add.at(grads["entity_vectors"], idx[:, 2], c * circular_convolution(Rv, H))


def _grads_convkb(model, idx, coef, grads):
    E, R = model.entity_vectors, model.relation_vectors
    H, Rv, T = E[idx[:, 0]], R[idx[:, 1]], E[idx[:, 2]]
    F = model.convkb_filters
    W = model.convkb_weights.reshape(model.tau, model.dim)
    Z = convkb_preactivations(model, H, Rv, T)
    live = (Z > 0.0).astype(np.float64)  # (B, tau, d) ReLU pass-through mask
    grads["convkb_weights"] += np.einsum("b,bfi->fi", coef, np.maximum(Z, 0.0)).reshape(-1)
    gate = live * W[None, :, :]
    for col, X in ((0, H), (1, Rv), (2, T)):
        grads["convkb_filters"][:, col] += np.einsum("b,fi,bfi,bi->f", coef, W, live, X)
    gh = np.einsum("bfi,f->bi", gate, F[:, 0])
    gr = np.einsum("bfi,f->bi", gate, F[:, 1])
    gt = np.einsum("bfi,f->bi", gate, F[:, 2])
    np.add.at(grads["entity_vectors"], idx[:, 0], coef[:, None] * gh)
    np.add.at(grads["relation_vectors"], idx[:, 1], coef[:, None] * gr)
    np.add.at(grads["entity_vectors"], idx[:, 2], coef[:, None] * gt)


_GRAD_FNS = {"transe": _grads_transe, "hole": _grads_hole, "convkb": _grads_convkb}


def loss_and_gradients(
    model: EmbeddingModel,
    positives: np.ndarray,
    negatives: np.ndarray,
    margin: float,
) -> tuple[float, dict]:
    """Total hinge loss over paired (positive, negative) rows and its exact
    gradient with respect to every parameter block."""
    s_pos = score_batch(model, positives[:, 0], positives[:, 1], positives[:, 2])
    s_neg = score_batch(model, negatives[:, 0], negatives[:, 1], negatives[:, 2])
    violation = margin - s_pos + s_neg
    active = violation > 0.0
    loss = float(violation[active].sum())

    grads = {
        "entity_vectors": np.zeros_like(model.entity_vectors),
        "relation_vectors": np.zeros_like(model.relation_vectors),
    }
    if model.kind == "convkb":
        grads["convkb_filters"] = np.zeros_like(model.convkb_filters)
        grads["convkb_weights"] = np.zeros_like(model.convkb_weights)
    if active.any():
        fn = _GRAD_FNS[model.kind]
        fn(model, positives[active], -np.ones(int(active.sum())), grads)
        fn(model, negatives[active], np.ones(int(active.sum())), grads)
    return loss, grads


def train(
    g: KnowledgeGraph,
    config: TrainConfig,
    progress: Callable[[int, float, float], None] | None = None,
) -> EmbeddingModel:
    """Mini-batch SGD on the margin ranking loss.

    Parameters start uniform in [-6/sqrt(d), +6/sqrt(d)]; translation-model
    entity vectors are re-normalized to unit L2 after every epoch. Reports
    (epoch, mean pair loss, elapsed ms) through `progress` and aborts with a
    diagnostic if the mean loss stops being finite.
    """
    config.validate()
    if config.target_relation is not None:
        triples = [trip for trip in g.triples if trip[1] == config.target_relation]
        if not triples:
            raise ValueError(f"no triples with target relation {config.target_relation}")
    else:
        triples = list(g.triples)
        if not triples:
            raise ValueError("cannot train on an empty graph")

    rng = np.random.default_rng(config.seed)
    model = init_model(
        config.model_kind,
        g.n_nodes,
        g.n_relations,
        config.dim,
        seed=config.seed,
        norm_kind=config.norm_kind,
        tau=config.tau,
        rng=rng,
    )
    pool = (
        relation_tails(g, config.target_relation)
        if config.negative_pool == "target-tails"
        else None
    )
    triple_arr = np.asarray(triples, dtype=np.int64)
    n_pos = len(triples)
    reps = config.negatives_per_positive
    param_names = ["entity_vectors", "relation_vectors"]
    if model.kind == "convkb":
        param_names += ["convkb_filters", "convkb_weights"]
    averaged: dict | None = None
    accum: dict | None = None
    if config.optimizer == "adagrad":
        accum = {name: np.zeros_like(getattr(model, name)) for name in param_names}

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n_pos)
        total_loss = 0.0
        total_pairs = 0
        for start in range(0, n_pos, config.batch_size):
            batch = triple_arr[order[start:start + config.batch_size]]
            pos = np.repeat(batch, reps, axis=0)
            neg = np.empty_like(pos)
            for i, row in enumerate(pos):
                trip = (int(row[0]), int(row[1]), int(row[2]))
                flip_head = (
                    config.corrupt_heads
                    and trip[1] != config.target_relation
                    and rng.random() < 0.5
                )
                neg[i] = negative_sample(g, trip, rng, pool=pool, corrupt_head=flip_head)
            loss, grads = loss_and_gradients(model, pos, neg, config.margin)
            lr = config.learning_rate
            for name in param_names:
                param = getattr(model, name)
                grad = grads[name]
                if config.weight_decay:
                    param *= 1.0 - lr * config.weight_decay
                if accum is None:
                    param -= lr * grad
                else:
                    accum[name] += grad * grad
                    param -= lr * grad / (np.sqrt(accum[name]) + 1e-10)
            total_loss += loss
            total_pairs += len(pos)
        mean_loss = total_loss / total_pairs
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"training aborted at epoch {epoch}: mean loss is not finite"
            )
        renorm = config.unit_norm_entities
        if renorm or (renorm is None and model.kind == "transe"):
            norms = np.linalg.norm(model.entity_vectors, axis=1, keepdims=True)
            np.divide(
                model.entity_vectors,
                norms,
                out=model.entity_vectors,
                where=norms > 1e-12,
            )
        if config.average_last_epochs and epoch > config.epochs - config.average_last_epochs:
            if averaged is None:
                averaged = {name: getattr(model, name).copy() for name in param_names}
            else:
                for name in param_names:
                    averaged[name] += getattr(model, name)
        if progress is not None:
            progress(epoch, mean_loss, (time.perf_counter() - started) * 1000.0)
    if averaged is not None:
        for name in param_names:
            setattr(model, name, averaged[name] / config.average_last_epochs)
        renorm = config.unit_norm_entities
        if renorm or (renorm is None and model.kind == "transe"):
            norms = np.linalg.norm(model.entity_vectors, axis=1, keepdims=True)
            np.divide(
                model.entity_vectors,
                norms,
                out=model.entity_vectors,
                where=norms > 1e-12,
            )
    return model
