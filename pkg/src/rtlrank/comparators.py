"""Pairwise preference sources.

Every comparator answers one question about an adjacent pair in the current
list: should the right item be moved in front of the left one?  A comparator
is any callable ``(left, right, rng) -> bool`` over candidate indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ContractError, Impression

Comparator = Callable[[int, int, np.random.Generator], bool]


@dataclass(frozen=True)
class OracleParams:
    """Swap probabilities of a comparator that knows the true labels.

    ``mu`` is the chance of a bad swap (relevant item on the left moved right),
    ``nu`` the chance of a good swap (relevant item on the right moved left),
    ``tie_swap`` the chance of swapping two items with equal labels.
    """

    mu: float
    nu: float
    tie_swap: float = 0.5

    def __post_init__(self):
        for name in ("mu", "nu", "tie_swap"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value!r}")


def bradley_terry(delta_i: float, delta_j: float) -> float:
    """P(i preferred over j) = exp(d_i) / (exp(d_i) + exp(d_j)), as a logistic of the difference."""
    if not (math.isfinite(delta_i) and math.isfinite(delta_j)):
        raise ContractError(f"non-finite strength: ({delta_i!r}, {delta_j!r})")
    x = delta_i - delta_j
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def oracle_compare(rel_left: int, rel_right: int, params: OracleParams, rng: np.random.Generator) -> bool:
    """Draw one uniform and decide whether to swap the pair."""
    u = rng.random()
    if rel_left == 1 and rel_right == 0:
        return u < params.mu
    if rel_left == 0 and rel_right == 1:
        return u < params.nu
    return u < params.tie_swap


class OracleComparator:
    """Label-aware stochastic comparator bound to one impression's labels."""

    def __init__(self, labels: Sequence[int], params: OracleParams):
        self.labels = tuple(int(x) for x in labels)
        self.params = params

    def __call__(self, left: int, right: int, rng: np.random.Generator) -> bool:
        return oracle_compare(self.labels[left], self.labels[right], self.params, rng)


class PreferenceTable:
    """Per-candidate strengths or an explicit pairwise probability map.

    Pairwise maps are keyed by ``(a, b)`` and hold ``P(a preferred over b)``;
    whenever both orientations are stored they must sum to one.
    """

    def __init__(
        self,
        strengths: Mapping[str, float] | None = None,
        pairwise: Mapping[tuple[str, str], float] | None = None,
    ):
        if (strengths is None) == (pairwise is None):
            raise ContractError("give exactly one of strengths or pairwise")
        self.strengths = None if strengths is None else dict(strengths)
        self.pairwise = None if pairwise is None else dict(pairwise)
        if self.pairwise is not None:
            for (a, b), p in self.pairwise.items():
                if not 0.0 <= p <= 1.0:
                    raise ContractError(f"P({a}>{b}) = {p} is not a probability")
                back = self.pairwise.get((b, a))
                if back is not None and abs(p + back - 1.0) > 1e-9:
                    raise ContractError(f"P({a}>{b}) + P({b}>{a}) = {p + back}, not 1")

    @classmethod
    def from_impression(cls, impression: Impression) -> "PreferenceTable":
        missing = [c.id for c in impression.candidates if c.pref is None]
        if missing:
            raise ContractError(f"impression {impression.id!r} lacks pref for {missing}")
        return cls(strengths={c.id: c.pref for c in impression.candidates})

    def prob(self, a: str, b: str) -> float:
        """P(a preferred over b)."""
        if self.strengths is not None:
            for key in (a, b):
                if key not in self.strengths:
                    raise KeyError(f"no strength for candidate {key!r}")
            return bradley_terry(self.strengths[a], self.strengths[b])
        if (a, b) in self.pairwise:
            return self.pairwise[(a, b)]
        if (b, a) in self.pairwise:
            return 1.0 - self.pairwise[(b, a)]
        raise KeyError(f"no preference stored for pair ({a!r}, {b!r})")


def table_compare(left_id: str, right_id: str, table: PreferenceTable) -> bool:
    """Swap iff the right item is strictly preferred; exact ties keep the order."""
    return table.prob(right_id, left_id) > 0.5


class TableComparator:
    """Deterministic comparator reading a :class:`PreferenceTable`; ignores ``rng``."""

    def __init__(self, ids: Sequence[str], table: PreferenceTable):
        self.ids = tuple(ids)
        self.table = table

    @classmethod
    def from_impression(cls, impression: Impression) -> "TableComparator":
        return cls([c.id for c in impression.candidates], PreferenceTable.from_impression(impression))

    def __call__(self, left: int, right: int, rng: np.random.Generator | None = None) -> bool:
        return table_compare(self.ids[left], self.ids[right], self.table)


class CountingComparator:
    """Wraps a comparator and counts calls."""

    def __init__(self, inner: Comparator):
        self.inner = inner
        self.calls = 0

    def __call__(self, left: int, right: int, rng: np.random.Generator) -> bool:
        self.calls += 1
        return self.inner(left, right, rng)
