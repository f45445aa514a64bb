"""Embedding models and their scoring functions.

Three interchangeable scorers over (head, relation, tail) id triples:

* translation:   -||v_h + v_r - v_t||  under an L1 or L2 norm
* correlation:   v_r . (v_h * v_t)  with [a*b]_k = sum_i a_i b_((i+k) mod d)
                 (circular correlation, evaluated through the FFT)
* convolution:   stack (v_h, v_r, v_t) as a d x 3 matrix, run tau width-3
                 row filters through a ReLU and dot the tau*d activations
                 with a weight vector

Higher scores mean more plausible triples. Parameters are float64 in memory;
archives store float32 (widening back is lossless).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import fileio

MODEL_KINDS = ("transe", "hole", "convkb")
NORM_KINDS = ("l1", "l2")


@dataclass
class EmbeddingModel:
    kind: str
    entity_vectors: np.ndarray  # (n, d)
    relation_vectors: np.ndarray  # (m, d)
    norm_kind: str = "l2"  # translation models only
    convkb_filters: np.ndarray | None = None  # (tau, 3)
    convkb_weights: np.ndarray | None = None  # (tau * d,)
    seed: int = 0

    @property
    def n_entities(self) -> int:
        return self.entity_vectors.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.entity_vectors.shape[1]

    @property
    def tau(self) -> int:
        return 0 if self.convkb_filters is None else self.convkb_filters.shape[0]

    def parameter_arrays(self) -> list[tuple[str, np.ndarray]]:
        blocks = [
            ("entity_vectors", self.entity_vectors),
            ("relation_vectors", self.relation_vectors),
        ]
        if self.kind == "convkb":
            blocks += [
                ("convkb_filters", self.convkb_filters),
                ("convkb_weights", self.convkb_weights),
            ]
        return blocks

    def parameter_bytes(self) -> int:
        return sum(arr.nbytes for _, arr in self.parameter_arrays())

    def check_entity(self, i: int) -> None:
        if not 0 <= i < self.n_entities:
            raise ValueError(f"entity id {i} out of range [0, {self.n_entities})")

    def check_relation(self, i: int) -> None:
        if not 0 <= i < self.n_relations:
            raise ValueError(f"relation id {i} out of range [0, {self.n_relations})")


def init_model(
    kind: str,
    n_entities: int,
    n_relations: int,
    dim: int,
    seed: int,
    norm_kind: str = "l2",
    tau: int = 64,
    rng: np.random.Generator | None = None,
) -> EmbeddingModel:
    """All parameter blocks start uniform in [-6/sqrt(d), +6/sqrt(d)]."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")
    if norm_kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {norm_kind!r}, expected one of {NORM_KINDS}")
    if rng is None:
        rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    model = EmbeddingModel(
        kind=kind,
        entity_vectors=rng.uniform(-bound, bound, size=(n_entities, dim)),
        relation_vectors=rng.uniform(-bound, bound, size=(n_relations, dim)),
        norm_kind=norm_kind,
        seed=seed,
    )
    if kind == "convkb":
        model.convkb_filters = rng.uniform(-bound, bound, size=(tau, 3))
        model.convkb_weights = rng.uniform(-bound, bound, size=(tau * dim,))
    return model


def circular_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[a*b]_k = sum_i a_i b_((i+k) mod d), batched over leading axes."""
    return np.fft.ifft(np.conj(np.fft.fft(a, axis=-1)) * np.fft.fft(b, axis=-1)).real


def circular_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(a, axis=-1) * np.fft.fft(b, axis=-1)).real


def convkb_preactivations(model: EmbeddingModel, H, R, T) -> np.ndarray:
    """Z[b, f, i] = F[f,0] h_i + F[f,1] r_i + F[f,2] t_i for each batch row."""
    F = model.convkb_filters
    return (
        F[:, 0][None, :, None] * H[:, None, :]
        + F[:, 1][None, :, None] * R[:, None, :]
        + F[:, 2][None, :, None] * T[:, None, :]
    )


def score_batch(model: EmbeddingModel, heads, relations, tails) -> np.ndarray:
    """Vectorized scores for id arrays of equal length."""
    H = model.entity_vectors[heads]
    R = model.relation_vectors[relations]
    T = model.entity_vectors[tails]
    if model.kind == "transe":
        diff = H + R - T
        if model.norm_kind == "l2":
            return -np.linalg.norm(diff, axis=-1)
        return -np.abs(diff).sum(axis=-1)
    if model.kind == "hole":
        return (R * circular_correlation(H, T)).sum(axis=-1)
    if model.kind == "convkb":
        act = np.maximum(convkb_preactivations(model, H, R, T), 0.0)
        W = model.convkb_weights.reshape(model.tau, model.dim)
        return np.einsum("bfi,fi->b", act, W)
    raise ValueError(f"unknown model kind {model.kind!r}")


def _score_one(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    model.check_entity(h)
    model.check_relation(r)
    model.check_entity(t)
    return float(score_batch(model, np.array([h]), np.array([r]), np.array([t]))[0])


def score_transe(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    if model.kind != "transe":
        raise ValueError(f"expected a transe model, got {model.kind!r}")
    return _score_one(model, h, r, t)


def score_hole(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    if model.kind != "hole":
        raise ValueError(f"expected a hole model, got {model.kind!r}")
    return _score_one(model, h, r, t)


def score_convkb(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    if model.kind != "convkb":
        raise ValueError(f"expected a convkb model, got {model.kind!r}")
    return _score_one(model, h, r, t)


def score(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    return _score_one(model, h, r, t)


def save_model(model: EmbeddingModel, path, extra_header: dict | None = None) -> None:
    header = {
        "model_kind": model.kind,
        "dim": model.dim,
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "seed": model.seed,
    }
    if model.kind == "transe":
        header["norm"] = model.norm_kind
    if model.kind == "convkb":
        header["tau"] = model.tau
    if extra_header:
        header.update(extra_header)
    fileio.save_archive(path, header, model.parameter_arrays())


def _require(header: dict, key: str, path) -> str:
    if key not in header:
        raise fileio.ArchiveError(f"{path}: header is missing {key!r}")
    return header[key]


def load_model(path) -> EmbeddingModel:
    header, arrays = fileio.load_archive(path)
    kind = _require(header, "model_kind", path)
    if kind not in MODEL_KINDS:
        raise fileio.ArchiveError(f"{path}: unknown model kind {kind!r}")
    try:
        dim = int(_require(header, "dim", path))
        n = int(_require(header, "n_entities", path))
        m = int(_require(header, "n_relations", path))
        seed = int(header.get("seed", 0))
    except ValueError as exc:
        raise fileio.ArchiveError(f"{path}: non-integer size in header") from exc

    expected: dict[str, tuple[int, ...]] = {
        "entity_vectors": (n, dim),
        "relation_vectors": (m, dim),
    }
    if kind == "convkb":
        try:
            tau = int(_require(header, "tau", path))
        except ValueError as exc:
            raise fileio.ArchiveError(f"{path}: non-integer tau in header") from exc
        expected["convkb_filters"] = (tau, 3)
        expected["convkb_weights"] = (tau * dim,)
    for name, shape in expected.items():
        if name not in arrays:
            raise fileio.ArchiveError(f"{path}: missing parameter block {name!r}")
        if arrays[name].shape != shape:
            raise fileio.ArchiveError(
                f"{path}: shape mismatch for {name!r}: block is {arrays[name].shape}, "
                f"header implies {shape}"
            )
    norm_kind = header.get("norm", "l2")
    if norm_kind not in NORM_KINDS:
        raise fileio.ArchiveError(f"{path}: unknown norm kind {norm_kind!r}")
    return EmbeddingModel(
        kind=kind,
        entity_vectors=arrays["entity_vectors"].astype(np.float64),
        relation_vectors=arrays["relation_vectors"].astype(np.float64),
        norm_kind=norm_kind,
        convkb_filters=(
            arrays["convkb_filters"].astype(np.float64) if kind == "convkb" else None
        ),
        convkb_weights=(
            arrays["convkb_weights"].astype(np.float64) if kind == "convkb" else None
        ),
        seed=seed,
    )
