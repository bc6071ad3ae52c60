"""Domain types shared across the package: impressions, rankings and relevance vectors.

Positions are 0-based internally; rank 1 (the top, leftmost slot) is index 0.
"Right" in a right-to-left pass is the high-index end of the list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np


class RankingError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(RankingError, ValueError):
    """A precondition of an operation was violated."""


class ParseError(RankingError):
    """An input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f"line {line}"
            if offset is not None:
                where += f", byte offset {offset}"
            where += ": "
        super().__init__(where + message)


class ConfigError(RankingError):
    """An experiment configuration is invalid."""


class NumericalError(RankingError):
    """A numerical routine failed to reach its accuracy target."""

    def __init__(self, message: str, estimate=None, error_bound=None):
        self.estimate = estimate
        self.error_bound = error_bound
        super().__init__(message)


@dataclass(frozen=True)
class CandidateRecord:
    id: str
    label: int
    score: float | None = None
    pref: float | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ContractError(f"candidate {self.id!r}: label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class Impression:
    """One ranking episode: a candidate set with binary labels and model outputs."""

    id: str
    candidates: tuple[CandidateRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))

    @classmethod
    def from_arrays(
        cls,
        labels: Sequence[int],
        scores: Sequence[float] | None = None,
        prefs: Sequence[float] | None = None,
        id: str = "imp",
        ids: Sequence[str] | None = None,
    ) -> "Impression":
        n = len(labels)
        ids = [f"c{i}" for i in range(n)] if ids is None else list(ids)
        cands = []
        for i in range(n):
            cands.append(
                CandidateRecord(
                    id=str(ids[i]),
                    label=int(labels[i]),
                    score=None if scores is None else float(scores[i]),
                    pref=None if prefs is None else float(prefs[i]),
                )
            )
        return cls(id=id, candidates=tuple(cands))

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(c.label for c in self.candidates)

    @property
    def scores(self) -> tuple[float | None, ...]:
        return tuple(c.score for c in self.candidates)

    @property
    def prefs(self) -> tuple[float | None, ...]:
        return tuple(c.pref for c in self.candidates)

    @property
    def has_scores(self) -> bool:
        return all(c.score is not None for c in self.candidates)

    @property
    def has_prefs(self) -> bool:
        return all(c.pref is not None for c in self.candidates)


def is_permutation(order: Iterable[int], n: int) -> bool:
    order = list(order)
    return len(order) == n and sorted(order) == list(range(n))


@dataclass(frozen=True)
class Ranking:
    """An ordered permutation of candidate indices.

    ``order[p]`` is the index of the candidate placed at rank ``p + 1``.
    """

    order: tuple[int, ...]
    source: str = "identity"
    comparisons_used: int = 0

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if not is_permutation(order, len(order)):
            raise ContractError(f"not a permutation: {order}")
        if self.comparisons_used < 0:
            raise ContractError("comparisons_used must be non-negative")

    @classmethod
    def identity(cls, n: int, source: str = "identity") -> "Ranking":
        return cls(tuple(range(n)), source=source)

    def __len__(self) -> int:
        return len(self.order)

    def with_order(self, order: Sequence[int], source: str | None = None, extra_comparisons: int = 0) -> "Ranking":
        return replace(
            self,
            order=tuple(order),
            source=self.source if source is None else source,
            comparisons_used=self.comparisons_used + extra_comparisons,
        )

    def positions(self) -> list[int]:
        """Inverse permutation: ``positions()[c]`` is the 0-based rank slot of candidate ``c``."""
        pos = [0] * len(self.order)
        for p, c in enumerate(self.order):
            pos[c] = p
        return pos


def relevance_of(ranking: Ranking, impression: Impression) -> np.ndarray:
    """Labels read off in rank order: ``z[p]`` is the label of the candidate at rank ``p + 1``."""
    if len(ranking) != len(impression):
        raise ContractError(
            f"ranking has {len(ranking)} positions but impression {impression.id!r} "
            f"has {len(impression)} candidates"
        )
    labels = impression.labels
    return np.array([labels[c] for c in ranking.order], dtype=np.int64)


def validate_impression(
    impression: Impression,
    require_scores: bool = False,
    require_prefs: bool = False,
) -> list[str]:
    """Return the list of violated invariants; an empty list means the impression is usable."""
    problems = []
    if len(impression) < 2:
        problems.append("fewer than 2 candidates")
    seen = set()
    for c in impression.candidates:
        if c.id in seen:
            problems.append(f"duplicate id {c.id!r}")
        seen.add(c.id)
    labels = impression.labels
    if 1 not in labels:
        problems.append("no positive")
    if 0 not in labels:
        problems.append("no negative")
    if require_scores:
        for c in impression.candidates:
            if c.score is None:
                problems.append(f"missing score for {c.id!r}")
            elif math.isnan(c.score):
                problems.append(f"NaN score for {c.id!r}")
    if require_prefs:
        for c in impression.candidates:
            if c.pref is None:
                problems.append(f"missing pref for {c.id!r}")
            elif not math.isfinite(c.pref):
                problems.append(f"non-finite pref for {c.id!r}")
    return problems
