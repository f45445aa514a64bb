"""Frequent-itemset mining and association rules over scene type sets.

Scenes act as transactions whose items are observed entity-type ids. Support
and confidence are kept as exact rationals built from integer counts, so rule
filtering never depends on floating-point rounding.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .fileio import DataFormatError, _read_text
from .graph import RankedPrediction


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset
    consequent: frozenset
    support: Fraction
    confidence: Fraction

    def __post_init__(self):
        if not self.antecedent or not self.consequent:
            raise ValueError("antecedent and consequent must be non-empty")
        if self.antecedent & self.consequent:
            raise ValueError("antecedent and consequent must be disjoint")


@dataclass
class RuleSet:
    rules: list

    def __len__(self) -> int:
        return len(self.rules)


def _frequent_enough(count: int, n_transactions: int, min_support: float) -> bool:
    # Exact comparison: count/n >= min_support as rationals, no epsilon games.
    return Fraction(count, n_transactions) >= min_support


def mine_frequent_itemsets(
    transactions: Sequence[Iterable[int]],
    min_support: float,
) -> dict:
    """Level-wise Apriori; returns every itemset whose support count reaches
    min_support as a map frozenset -> count."""
    if not transactions:
        raise ValueError("transactions must be non-empty")
    if not 0 < min_support <= 1:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    sets = [frozenset(t) for t in transactions]
    n = len(sets)

    counts = Counter(item for t in sets for item in t)
    frequent: dict = {
        frozenset([item]): c for item, c in counts.items() if _frequent_enough(c, n, min_support)
    }
    level = sorted(tuple(sorted(s)) for s in frequent)
    k = 2
    while level:
        candidates = []
        for i in range(len(level)):
            for j in range(i + 1, len(level)):
                a, b = level[i], level[j]
                if a[: k - 2] != b[: k - 2]:
                    continue
                cand = tuple(sorted(set(a) | set(b)))
                fs = frozenset(cand)
                # prune: all (k-1)-subsets must already be frequent
                if all(fs - {item} in frequent for item in fs):
                    candidates.append(fs)
        candidates = sorted(set(candidates), key=sorted)
        if not candidates:
            break
        tally = Counter()
        for t in sets:
            for cand in candidates:
                if cand <= t:
                    tally[cand] += 1
        survivors = {
            cand: c for cand, c in tally.items() if _frequent_enough(c, n, min_support)
        }
        frequent.update(survivors)
        level = sorted(tuple(sorted(s)) for s in survivors)
        k += 1
    return frequent


def generate_rules(
    frequent: Mapping,
    n_transactions: int,
    min_confidence: float,
) -> RuleSet:
    """All rules A => F\\A over frequent itemsets F with |F| >= 2 whose exact
    confidence count(F)/count(A) reaches min_confidence."""
    rules: list[AssociationRule] = []
    for itemset, count in frequent.items():
        if len(itemset) < 2:
            continue
        items = sorted(itemset)
        for size in range(1, len(items)):
            for combo in combinations(items, size):
                antecedent = frozenset(combo)
                if antecedent not in frequent:
                    raise ValueError(
                        f"frequent map is not downward-closed: missing count for {sorted(antecedent)}"
                    )
                confidence = Fraction(count, frequent[antecedent])
                if confidence >= min_confidence:
                    rules.append(
                        AssociationRule(
                            antecedent=antecedent,
                            consequent=itemset - antecedent,
                            support=Fraction(count, n_transactions),
                            confidence=confidence,
                        )
                    )
    rules.sort(key=lambda r: (sorted(r.antecedent), sorted(r.consequent)))
    return RuleSet(rules)


def predict_arm(rules: RuleSet, observed: Iterable[int]) -> RankedPrediction:
    """Apply every rule whose antecedent is a subset of the observed types and
    rank the new consequent items by max confidence, then support, then id."""
    obs = frozenset(observed)
    best: dict = {}
    for rule in rules.rules:
        if not rule.antecedent <= obs:
            continue
        for item in rule.consequent - obs:
            prev = best.get(item)
            key = (rule.confidence, rule.support)
            if prev is None or key > prev:
                best[item] = key
    order = sorted(best, key=lambda item: (-best[item][0], -best[item][1], item))
    return [(item, float(best[item][0])) for item in order]


def save_rules(ruleset: RuleSet, path, labels: Sequence[str], header: Mapping | None = None) -> None:
    """Tab-separated export: antecedent labels, consequent labels (comma
    joined, ascending id), then support and confidence as num/den."""
    lines = [f"# {k}={v}" for k, v in (header or {}).items()]
    for rule in ruleset.rules:
        lines.append(
            "\t".join(
                (
                    ",".join(labels[i] for i in sorted(rule.antecedent)),
                    ",".join(labels[i] for i in sorted(rule.consequent)),
                    f"{rule.support.numerator}/{rule.support.denominator}",
                    f"{rule.confidence.numerator}/{rule.confidence.denominator}",
                )
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_rules(path, label_ids: Mapping) -> RuleSet:
    rules: list[AssociationRule] = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataFormatError(f"{path}: line {lineno}: expected 4 tab-separated fields")

        def resolve(csv: str) -> frozenset:
            out = set()
            for lab in csv.split(","):
                if lab not in label_ids:
                    raise DataFormatError(f"{path}: line {lineno}: unknown label {lab!r}")
                out.add(label_ids[lab])
            return frozenset(out)

        def ratio(text: str) -> Fraction:
            num, _, den = text.partition("/")
            try:
                return Fraction(int(num), int(den))
            except (ValueError, ZeroDivisionError) as exc:
                raise DataFormatError(f"{path}: line {lineno}: bad ratio {text!r}") from exc

        try:
            rules.append(
                AssociationRule(
                    antecedent=resolve(fields[0]),
                    consequent=resolve(fields[1]),
                    support=ratio(fields[2]),
                    confidence=ratio(fields[3]),
                )
            )
        except ValueError as exc:
            if isinstance(exc, DataFormatError):
                raise
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
    return RuleSet(rules)
