"""Collective classification of missing scene types from co-occurrence counts.

A smoothed co-occurrence scorer plays the base classifier: a candidate label
is scored by its smoothed log frequency plus, for each evidence type, the
smoothed log probability of co-occurring with it. Multiple missing slots are
filled with the iterative classification algorithm, re-scoring each slot
against the others' current pseudo-labels in a fixed order until stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import fileio
from .graph import RankedPrediction, SceneRecord


@dataclass
class CooccurrenceModel:
    type_ids: tuple  # vocabulary as graph node ids, ascending
    label_counts: np.ndarray  # (L,) scenes containing each type
    pair_counts: np.ndarray  # (L, L) symmetric, zero diagonal
    n_scenes: int
    alpha: float

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.type_ids)}

    @property
    def vocab_size(self) -> int:
        return len(self.type_ids)

    def contains(self, type_id: int) -> bool:
        return type_id in self._index

    def index_of(self, type_id: int) -> int:
        return self._index[type_id]


def train_cc(
    train_scenes: Sequence[SceneRecord],
    alpha: float = 1.0,
    type_vocab: Iterable[int] | None = None,
) -> CooccurrenceModel:
    """Count single and pairwise within-scene type occurrences.

    The vocabulary defaults to every type seen in the training scenes; pass
    `type_vocab` to fix it to the full candidate set.
    """
    if not train_scenes:
        raise ValueError("cannot train on an empty scene list")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if type_vocab is None:
        vocab = sorted({t for rec in train_scenes for t in rec.observed})
    else:
        vocab = sorted(set(type_vocab))
    index = {t: i for i, t in enumerate(vocab)}
    L = len(vocab)
    label_counts = np.zeros(L, dtype=np.int64)
    pair_counts = np.zeros((L, L), dtype=np.int64)
    for rec in train_scenes:
        present = sorted(index[t] for t in rec.observed if t in index)
        for i in present:
            label_counts[i] += 1
        for a_pos in range(len(present)):
            for b_pos in range(a_pos + 1, len(present)):
                a, b = present[a_pos], present[b_pos]
                pair_counts[a, b] += 1
                pair_counts[b, a] += 1
    return CooccurrenceModel(
        type_ids=tuple(vocab),
        label_counts=label_counts,
        pair_counts=pair_counts,
        n_scenes=len(train_scenes),
        alpha=alpha,
    )


def score_labels(model: CooccurrenceModel, evidence: Iterable[int]) -> RankedPrediction:
    """Rank every vocabulary type outside the evidence set.

    score(l) = log((count(l) + a) / (n_scenes + a L))
             + sum_o log((pair(l, o) + a) / (count(l) + a L))

    The evidence sum runs in ascending type order so permuting the input set
    leaves scores bit-identical.
    """
    ev = sorted(set(evidence))
    for t in ev:
        if not model.contains(t):
            raise ValueError(f"evidence type {t} is not in the model vocabulary")
    L = model.vocab_size
    a = model.alpha
    counts = model.label_counts.astype(np.float64)
    scores = np.log((counts + a) / (model.n_scenes + a * L))
    for t in ev:
        o = model.index_of(t)
        scores = scores + np.log((model.pair_counts[:, o] + a) / (counts + a * L))
    ev_set = set(ev)
    ranked = [
        (t, float(scores[i]))
        for i, t in enumerate(model.type_ids)
        if t not in ev_set
    ]
    ranked.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranked


def assignment_score(
    model: CooccurrenceModel,
    observed: Iterable[int],
    assignment: Sequence[int],
) -> float:
    """Joint pseudo-likelihood of a slot assignment: each slot's score given
    the observed types plus the other slots' labels."""
    obs = frozenset(observed)
    total = 0.0
    for j, label in enumerate(assignment):
        evidence = obs | {assignment[k] for k in range(len(assignment)) if k != j}
        ranked = dict(score_labels(model, evidence))
        total += ranked[label]
    return total


def iterate_assignments(
    model: CooccurrenceModel,
    observed: Iterable[int],
    n_slots: int,
    max_iters: int,
) -> tuple[list, list, list]:
    """Run the iterative classification loop.

    Returns (final slot labels, per-slot rankings from the last pass, joint
    pseudo-likelihood after each pass). Slots update in ascending index order;
    the loop stops after a pass that changes nothing or after max_iters.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be >= 1, got {n_slots}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    obs = frozenset(observed)
    base = score_labels(model, obs)
    pseudo = [t for t, _ in base[:n_slots]]
    if not pseudo:
        return [], [base], []
    slot_rankings: list = [base for _ in pseudo]
    trace: list = []
    for _ in range(max_iters):
        changed = False
        for j in range(len(pseudo)):
            evidence = obs | {pseudo[k] for k in range(len(pseudo)) if k != j}
            ranking = score_labels(model, evidence)
            slot_rankings[j] = ranking
            if ranking and ranking[0][0] != pseudo[j]:
                pseudo[j] = ranking[0][0]
                changed = True
        trace.append(assignment_score(model, obs, pseudo))
        if not changed:
            break
    return pseudo, slot_rankings, trace


def predict_cc_iterative(
    model: CooccurrenceModel,
    observed: Iterable[int],
    n_slots: int = 1,
    max_iters: int = 10,
) -> RankedPrediction:
    """Final ranking after iterative classification: the last pass's per-slot
    rankings merged by max score per label (ties by ascending id)."""
    pseudo, slot_rankings, _ = iterate_assignments(model, observed, n_slots, max_iters)
    merged: dict = {}
    for ranking in slot_rankings:
        for label, s in ranking:
            if label not in merged or s > merged[label]:
                merged[label] = s
    order = sorted(merged, key=lambda label: (-merged[label], label))
    return [(label, merged[label]) for label in order]


def save_cc_model(model: CooccurrenceModel, path, extra_header: Mapping | None = None) -> None:
    """Persist through the float32 archive; counts stay exact below 2**24."""
    limit = float(2**24)
    if model.n_scenes > limit or float(model.pair_counts.max(initial=0)) > limit:
        raise ValueError("counts too large to store exactly as float32")
    header = {
        "model_kind": "cooccurrence",
        "vocab_size": model.vocab_size,
        "n_scenes": model.n_scenes,
        "alpha": repr(model.alpha),
    }
    if extra_header:
        header.update(extra_header)
    fileio.save_archive(
        path,
        header,
        [
            ("type_ids", np.asarray(model.type_ids, dtype=np.float64)),
            ("label_counts", model.label_counts.astype(np.float64)),
            ("pair_counts", model.pair_counts.astype(np.float64)),
        ],
    )


def load_cc_model(path) -> CooccurrenceModel:
    header, arrays = fileio.load_archive(path)
    if header.get("model_kind") != "cooccurrence":
        raise fileio.ArchiveError(
            f"{path}: expected a cooccurrence archive, got {header.get('model_kind')!r}"
        )
    try:
        L = int(header["vocab_size"])
        n_scenes = int(header["n_scenes"])
        alpha = float(header["alpha"])
    except (KeyError, ValueError) as exc:
        raise fileio.ArchiveError(f"{path}: bad cooccurrence header") from exc
    for name, shape in (("type_ids", (L,)), ("label_counts", (L,)), ("pair_counts", (L, L))):
        if name not in arrays:
            raise fileio.ArchiveError(f"{path}: missing parameter block {name!r}")
        if arrays[name].shape != shape:
            raise fileio.ArchiveError(
                f"{path}: shape mismatch for {name!r}: block is {arrays[name].shape}, "
                f"header implies {shape}"
            )
    return CooccurrenceModel(
        type_ids=tuple(int(t) for t in arrays["type_ids"]),
        label_counts=arrays["label_counts"].astype(np.int64),
        pair_counts=arrays["pair_counts"].astype(np.int64),
        n_scenes=n_scenes,
        alpha=alpha,
    )
