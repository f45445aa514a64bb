"""Synthetic scene generator with planted archetype structure.

Each scene draws an archetype from a prior, includes every type independently
with the archetype's inclusion probability, then flips each inclusion with a
noise probability. Because the generating distribution is known, an exact
posterior over the missing type is available as a Bayes-optimal oracle: the
accuracy ceiling any solver can be measured against.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .graph import LabelTriple, SceneRecord, build_graph

INCLUDES_RELATION = "includes"
TYPE_RELATION = "type"

_MAX_REDRAWS = 16


def scene_label(i: int) -> str:
    return f"s{i:05d}"


def instance_label(i: int, j: int) -> str:
    return f"s{i:05d}_e{j}"


def type_label(v: int) -> str:
    return f"t{v:02d}"


def type_index(label: str) -> int:
    if not label.startswith("t"):
        raise ValueError(f"not a type label: {label!r}")
    return int(label[1:])


@dataclass(frozen=True)
class GeneratorConfig:
    n_archetypes: int
    vocab_size: int
    inclusion: tuple  # (A, V) rows of per-type inclusion probabilities
    prior: tuple  # (A,) archetype probabilities, sums to 1
    noise: float  # per-type flip probability after sampling
    n_scenes: int
    seed: int

    def validate(self) -> None:
        if self.n_archetypes < 1:
            raise ValueError(f"invalid field n_archetypes: {self.n_archetypes}")
        if self.vocab_size < 2:
            raise ValueError(f"invalid field vocab_size: {self.vocab_size}")
        if self.n_scenes < 1:
            raise ValueError(f"invalid field n_scenes: {self.n_scenes}")
        if not 0 <= self.noise < 0.5:
            raise ValueError(f"invalid field noise: {self.noise} (need 0 <= noise < 0.5)")
        P = np.asarray(self.inclusion, dtype=np.float64)
        if P.shape != (self.n_archetypes, self.vocab_size):
            raise ValueError(
                f"invalid field inclusion: shape {P.shape}, "
                f"expected ({self.n_archetypes}, {self.vocab_size})"
            )
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("invalid field inclusion: entries must lie in [0, 1]")
        pi = np.asarray(self.prior, dtype=np.float64)
        if pi.shape != (self.n_archetypes,):
            raise ValueError(f"invalid field prior: shape {pi.shape}")
        if np.any(pi < 0) or abs(float(pi.sum()) - 1.0) > 1e-9:
            raise ValueError("invalid field prior: must be non-negative and sum to 1")

    def inclusion_array(self) -> np.ndarray:
        return np.asarray(self.inclusion, dtype=np.float64)

    def prior_array(self) -> np.ndarray:
        return np.asarray(self.prior, dtype=np.float64)

    def effective_inclusion(self) -> np.ndarray:
        """Per-type inclusion probabilities after flip noise."""
        P = self.inclusion_array()
        return P * (1.0 - self.noise) + (1.0 - P) * self.noise


def default_config(**overrides) -> GeneratorConfig:
    """Five archetypes over twelve types with block-diagonal structure:
    in-block inclusion 0.8, off-block 0.05, flip noise 0.1, 2000 scenes."""
    cfg = block_config(
        n_archetypes=5,
        vocab_size=12,
        in_block=0.8,
        off_block=0.05,
        noise=0.1,
        n_scenes=2000,
        seed=42,
    )
    return replace(cfg, **overrides) if overrides else cfg


def block_config(
    n_archetypes: int,
    vocab_size: int,
    in_block: float = 0.8,
    off_block: float = 0.05,
    noise: float = 0.1,
    n_scenes: int = 2000,
    seed: int = 42,
) -> GeneratorConfig:
    """Block-diagonal inclusion matrix: types split into contiguous blocks,
    one per archetype, as evenly as possible."""
    bounds = np.linspace(0, vocab_size, n_archetypes + 1).astype(int)
    P = np.full((n_archetypes, vocab_size), off_block, dtype=np.float64)
    for a in range(n_archetypes):
        P[a, bounds[a]:bounds[a + 1]] = in_block
    cfg = GeneratorConfig(
        n_archetypes=n_archetypes,
        vocab_size=vocab_size,
        inclusion=tuple(tuple(row) for row in P),
        prior=tuple([1.0 / n_archetypes] * n_archetypes),
        noise=noise,
        n_scenes=n_scenes,
        seed=seed,
    )
    cfg.validate()
    return cfg


def load_generator_config(path) -> GeneratorConfig:
    """Read a plain-text key=value config.

    Recognized keys: archetypes, vocab, n_scenes, seed, noise, in_block,
    off_block, prior (comma-separated), inclusion_row_<a> (comma-separated,
    overrides one matrix row).
    """
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()

    def pop_num(key, cast, default):
        if key not in values:
            return default
        try:
            return cast(values.pop(key))
        except ValueError as exc:
            raise ValueError(f"invalid field {key}: {exc}") from exc

    cfg = block_config(
        n_archetypes=pop_num("archetypes", int, 5),
        vocab_size=pop_num("vocab", int, 12),
        in_block=pop_num("in_block", float, 0.8),
        off_block=pop_num("off_block", float, 0.05),
        noise=pop_num("noise", float, 0.1),
        n_scenes=pop_num("n_scenes", int, 2000),
        seed=pop_num("seed", int, 42),
    )
    if "prior" in values:
        prior = tuple(float(x) for x in values.pop("prior").split(","))
        cfg = replace(cfg, prior=prior)
    rows = {k: v for k, v in values.items() if k.startswith("inclusion_row_")}
    if rows:
        P = [list(row) for row in cfg.inclusion]
        for key, val in rows.items():
            a = int(key.removeprefix("inclusion_row_"))
            if not 0 <= a < cfg.n_archetypes:
                raise ValueError(f"invalid field {key}: archetype index out of range")
            P[a] = [float(x) for x in val.split(",")]
            values.pop(key)
        cfg = replace(cfg, inclusion=tuple(tuple(row) for row in P))
    if values:
        raise ValueError(f"invalid field {sorted(values)[0]}: unknown key")
    cfg.validate()
    return cfg


def _draw_scene_types(cfg: GeneratorConfig, rng: np.random.Generator) -> tuple[int, list]:
    P = cfg.inclusion_array()
    archetype = int(rng.choice(cfg.n_archetypes, p=cfg.prior_array()))
    included = None
    for _ in range(_MAX_REDRAWS):
        base = rng.random(cfg.vocab_size) < P[archetype]
        flips = rng.random(cfg.vocab_size) < cfg.noise
        draw = base ^ flips
        if int(draw.sum()) >= 2:
            included = draw
            break
    if included is None:
        # fall back to the two most likely types under this archetype
        q = cfg.effective_inclusion()[archetype]
        top2 = np.argsort(-q, kind="stable")[:2]
        included = np.zeros(cfg.vocab_size, dtype=bool)
        included[top2] = True
    return archetype, [int(v) for v in np.nonzero(included)[0]]


def generate(cfg: GeneratorConfig) -> tuple[list, list]:
    """Sample scenes and emit (label triples, scene records).

    The triple list holds the raw two-hop structure (scene-includes-instance,
    instance-type-type); records reference the vocabulary that
    ``build_graph(triples)`` assigns. Scenes with fewer than two types are
    redrawn a bounded number of times, then forced to the archetype's two
    most likely types. Each scene derives its own RNG substream from
    (seed, scene index), so generation order cannot change the output.
    """
    cfg.validate()
    triples: list[LabelTriple] = []
    per_scene_types: list[list[int]] = []
    for i in range(cfg.n_scenes):
        rng = np.random.default_rng([cfg.seed, i])
        _, types = _draw_scene_types(cfg, rng)
        per_scene_types.append(types)
        for j, v in enumerate(types):
            inst = instance_label(i, j)
            triples.append((scene_label(i), INCLUDES_RELATION, inst))
            triples.append((inst, TYPE_RELATION, type_label(v)))
    g = build_graph(triples)
    records = [
        SceneRecord(
            g.node_id(scene_label(i)),
            frozenset(g.node_id(type_label(v)) for v in types),
        )
        for i, types in enumerate(per_scene_types)
    ]
    return triples, records


def bayes_posterior(cfg: GeneratorConfig, observed: Iterable[int]) -> dict:
    """Exact posterior over the single missing type given observed types.

    P(miss = v | obs) sums over archetypes the prior times the exact
    Bernoulli likelihood of the full inclusion pattern "observed types plus v
    present, everything else absent", with the flip noise folded into each
    per-type inclusion probability. Normalized over candidates v not in obs.
    """
    cfg.validate()
    if cfg.n_archetypes * cfg.vocab_size > 10_000:
        raise ValueError("archetypes x vocab too large for exact enumeration")
    obs = sorted(set(observed))
    for v in obs:
        if not 0 <= v < cfg.vocab_size:
            raise ValueError(f"observed type index {v} out of range")
    unobserved = [v for v in range(cfg.vocab_size) if v not in set(obs)]
    if not unobserved:
        return {}
    q = cfg.effective_inclusion()  # (A, V)
    pi = cfg.prior_array()
    with np.errstate(divide="ignore"):
        logq = np.log(q)
        log1mq = np.log1p(-q)

    # per archetype: log-likelihood of the observed types being present,
    # plus sum over unobserved-and-finite of log(1 - q); types with q == 1
    # cannot be absent and are tracked separately.
    ll_obs = logq[:, obs].sum(axis=1) if obs else np.zeros(len(pi))
    unit = q[:, unobserved] >= 1.0  # (A, U)
    finite_sum = np.where(unit, 0.0, log1mq[:, unobserved]).sum(axis=1)
    n_unit = unit.sum(axis=1)

    log_weights = np.full((len(pi), len(unobserved)), -np.inf)
    with np.errstate(invalid="ignore"):
        for a in range(len(pi)):
            if pi[a] <= 0:
                continue
            for col, v in enumerate(unobserved):
                units_left = n_unit[a] - (1 if unit[a, col] else 0)
                if units_left > 0:
                    continue  # some other always-present type would be absent
                absent = finite_sum[a] - (0.0 if unit[a, col] else log1mq[a, v])
                log_weights[a, col] = np.log(pi[a]) + ll_obs[a] + logq[a, v] + absent

    col_logs = np.logaddexp.reduce(log_weights, axis=0)
    top = float(np.max(col_logs))
    if not np.isfinite(top):
        # observation impossible under every archetype: uniform fallback
        uniform = 1.0 / len(unobserved)
        return {v: uniform for v in unobserved}
    weights = np.exp(col_logs - top)
    weights /= weights.sum()
    return {v: float(w) for v, w in zip(unobserved, weights)}


def bayes_optimal_top1(cfg: GeneratorConfig, observed: Iterable[int]) -> tuple[int, dict]:
    """Argmax of the exact posterior (ties broken by ascending type index)."""
    posterior = bayes_posterior(cfg, observed)
    if not posterior:
        raise ValueError("no unobserved types left to predict")
    best = min(posterior, key=lambda v: (-posterior[v], v))
    return best, posterior
