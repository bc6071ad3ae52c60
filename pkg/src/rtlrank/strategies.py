"""Inference strategies that turn pointwise scores and a pairwise comparator into a ranking.

Each strategy returns a :class:`~rtlrank.core.Ranking` whose ``comparisons_used``
counts comparator calls exactly:

========================  ==================================
strategy                  comparator calls
========================  ==================================
pointwise                 0
rtl (m passes, top-k)     m * (k - 1)
bubble (full sort)        K (K - 1) / 2
box filling               K (K - 1) / 2
n-window / s-window       sum over windows of w' (w' - 1) / 2
========================  ==================================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .comparators import Comparator
from .core import ContractError, Impression, Ranking


class Kind(str, enum.Enum):
    POINTWISE = "pointwise"
    RTL = "rtl"
    BUBBLE_FULL = "bubble"
    BOX_FILLING = "box"
    N_WINDOW = "nwindow"
    S_WINDOW = "swindow"


class Init(str, enum.Enum):
    POINTWISE = "pointwise"
    RANDOM = "random"


@dataclass(frozen=True)
class StrategySpec:
    kind: Kind = Kind.RTL
    passes: int = 1
    top_k: int = 5
    init: Init = Init.POINTWISE
    window: int = 2
    skip: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "init", Init(self.init))
        if self.kind is Kind.RTL:
            if self.passes < 1:
                raise ContractError("RTL needs at least one pass")
            if self.top_k < 2:
                raise ContractError("RTL top_k must be at least 2")
        if self.kind in (Kind.N_WINDOW, Kind.S_WINDOW):
            if self.window < 2:
                raise ContractError("window size must be at least 2")
            if self.skip < 1:
                raise ContractError("skip must be at least 1")

    @property
    def label(self) -> str:
        """Short, unambiguous name used in reports."""
        k = self.kind
        if k is Kind.RTL:
            return f"rtl(m={self.passes},top={self.top_k})"
        if k is Kind.BUBBLE_FULL:
            return f"bubble(init={self.init.value})"
        if k is Kind.N_WINDOW:
            return f"nwindow(w={self.window})"
        if k is Kind.S_WINDOW:
            return f"swindow(w={self.window},s={self.skip})"
        return k.value

    def params(self) -> dict:
        k = self.kind
        if k is Kind.RTL:
            return {"passes": self.passes, "top_k": self.top_k}
        if k is Kind.BUBBLE_FULL:
            return {"init": self.init.value}
        if k is Kind.N_WINDOW:
            return {"window": self.window}
        if k is Kind.S_WINDOW:
            return {"window": self.window, "skip": self.skip}
        return {}


def pointwise_sort(impression: Impression) -> Ranking:
    """Descending score order; ties keep the original candidate order."""
    for c in impression.candidates:
        if c.score is None:
            raise ContractError(f"candidate {c.id!r} in impression {impression.id!r} has no score")
    scores = impression.scores
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    return Ranking(tuple(order), source="pointwise", comparisons_used=0)


def _sweep_rtl(order: list[int], comparator: Comparator, lo: int, hi: int, rng) -> int:
    """Right-to-left adjacent pass over slots ``lo..hi-1`` in place; returns the number of comparisons."""
    for p in range(hi - 2, lo - 1, -1):
        if comparator(order[p], order[p + 1], rng):
            order[p], order[p + 1] = order[p + 1], order[p]
    return max(hi - lo - 1, 0)


def rtl_pass(ranking: Ranking, comparator: Comparator, top_k: int, rng: np.random.Generator | None = None) -> Ranking:
    """One right-to-left pass over the first ``top_k`` slots.

    Pairs ``(top_k-1, top_k), ..., (1, 2)`` (1-based) are compared in that
    order, each swap taking effect before the next comparison.  Slots past
    ``top_k`` are left alone.
    """
    K = len(ranking)
    if not 2 <= top_k <= K:
        raise ContractError(f"top_k={top_k} outside 2..{K}")
    order = list(ranking.order)
    used = _sweep_rtl(order, comparator, 0, top_k, rng)
    return ranking.with_order(order, extra_comparisons=used)


def rtl_refine(ranking: Ranking, comparator: Comparator, passes: int, top_k: int, rng=None) -> Ranking:
    """``passes`` successive RTL passes; ``top_k`` is clipped to the list length."""
    if passes < 1:
        raise ContractError("passes must be at least 1")
    k = min(top_k, len(ranking))
    if k < 2:
        raise ContractError(f"top_k={top_k} leaves nothing to compare")
    for _ in range(passes):
        ranking = rtl_pass(ranking, comparator, k, rng)
    return ranking


def rtl_aggregate(
    impression: Impression, comparator: Comparator, passes: int = 1, top_k: int = 5, rng=None
) -> Ranking:
    """Pointwise sort followed by ``passes`` RTL passes over the top ``top_k`` items."""
    ranking = pointwise_sort(impression)
    ranking = rtl_refine(ranking, comparator, passes, top_k, rng)
    return ranking.with_order(ranking.order, source=f"rtl(m={passes},top={top_k})")


def _initial(impression: Impression, init: Init, rng) -> Ranking:
    if init is Init.POINTWISE:
        return pointwise_sort(impression)
    if rng is None:
        raise ContractError("random initialisation needs an rng")
    return Ranking(tuple(int(i) for i in rng.permutation(len(impression))), source="random")


def bubble_sort_full(
    ranking_or_impression, comparator: Comparator, init: Init | str = Init.POINTWISE, rng=None
) -> Ranking:
    """Stochastic bubble sort made of K-1 right-to-left passes.

    Pass ``p`` (1-based) sweeps slots ``p..K``: the previous pass has already
    carried its winner to slot ``p - 1``, so the frozen part grows from the top.
    """
    init = Init(init)
    if isinstance(ranking_or_impression, Ranking):
        ranking = ranking_or_impression
    else:
        ranking = _initial(ranking_or_impression, init, rng)
    K = len(ranking)
    order = list(ranking.order)
    used = 0
    for lo in range(K - 1):
        used += _sweep_rtl(order, comparator, lo, K, rng)
    return ranking.with_order(order, source=f"bubble(init={init.value})", extra_comparisons=used)


def _all_pairs_reorder(items: list[int], comparator: Comparator, rng) -> tuple[list[int], int]:
    """Compare every pair once (earlier item on the left) and sort by win count.

    Ties in win count keep the incoming order.
    """
    n = len(items)
    wins = [0] * n
    for a in range(n):
        for b in range(a + 1, n):
            if comparator(items[a], items[b], rng):
                wins[b] += 1
            else:
                wins[a] += 1
    idx = sorted(range(n), key=lambda i: (-wins[i], i))
    return [items[i] for i in idx], n * (n - 1) // 2


def box_filling(impression_or_ranking, comparator: Comparator, rng=None) -> Ranking:
    """Fill the all-pairs preference table and rank by wins.

    Ties are broken by pointwise order (score, then original position) when
    scores are available, otherwise by the incoming order.
    """
    if isinstance(impression_or_ranking, Ranking):
        ranking = impression_or_ranking
    elif impression_or_ranking.has_scores:
        ranking = pointwise_sort(impression_or_ranking)
    else:
        ranking = Ranking.identity(len(impression_or_ranking))
    if len(ranking) < 2:
        raise ContractError("box filling needs at least two candidates")
    order, used = _all_pairs_reorder(list(ranking.order), comparator, rng)
    return ranking.with_order(order, source="box", extra_comparisons=used)


def _window_starts(n: int, w: int) -> list[tuple[int, int]]:
    """Overlap-1 windows ``[0, w), [w-1, 2w-1), ...`` over ``n`` slots; trailing windows keep at least two slots."""
    spans = []
    start = 0
    while start < n - 1:
        spans.append((start, min(start + w, n)))
        start += w - 1
    return spans


def window_rerank(
    ranking: Ranking,
    comparator: Comparator,
    kind: Kind | str = Kind.N_WINDOW,
    w: int = 2,
    s: int = 1,
    rng=None,
) -> Ranking:
    """Sliding-window all-pairs reranking.

    ``N_WINDOW`` walks overlap-1 windows of ``w`` consecutive slots from the
    top, reordering each window by its within-window win counts before moving
    on.  ``S_WINDOW`` first splits the slots into ``s`` strided groups
    (``r, r+s, r+2s, ...``), runs the same walk inside each group and writes
    the result back to the group's slots.
    """
    kind = Kind(kind)
    K = len(ranking)
    if not 2 <= w <= K:
        raise ContractError(f"window w={w} outside 2..{K}")
    if s < 1:
        raise ContractError(f"skip s={s} must be positive")
    if kind is Kind.N_WINDOW:
        groups = [list(range(K))]
        source = f"nwindow(w={w})"
    elif kind is Kind.S_WINDOW:
        groups = [list(range(r, K, s)) for r in range(min(s, K))]
        source = f"swindow(w={w},s={s})"
    else:
        raise ContractError(f"{kind.value} is not a window strategy")
    order = list(ranking.order)
    used = 0
    for slots in groups:
        items = [order[p] for p in slots]
        for lo, hi in _window_starts(len(items), w):
            items[lo:hi], n = _all_pairs_reorder(items[lo:hi], comparator, rng)
            used += n
        for p, c in zip(slots, items):
            order[p] = c
    return ranking.with_order(order, source=source, extra_comparisons=used)


def expected_comparisons(spec: StrategySpec, K: int) -> int:
    """Closed-form comparator-call count of ``spec`` on a list of ``K`` items."""
    kind = spec.kind
    if kind is Kind.POINTWISE:
        return 0
    if kind is Kind.RTL:
        return spec.passes * (min(spec.top_k, K) - 1)
    if kind in (Kind.BUBBLE_FULL, Kind.BOX_FILLING):
        return K * (K - 1) // 2
    if kind is Kind.N_WINDOW:
        groups = [K]
    else:
        groups = [len(range(r, K, spec.skip)) for r in range(min(spec.skip, K))]
    w = min(spec.window, K)
    total = 0
    for n in groups:
        for lo, hi in _window_starts(n, w):
            total += (hi - lo) * (hi - lo - 1) // 2
    return total


def run_strategy(spec: StrategySpec, impression: Impression, comparator: Comparator, rng=None) -> Ranking:
    """Dispatch ``spec`` on one impression and check the comparison budget."""
    kind = spec.kind
    if kind is Kind.POINTWISE:
        result = pointwise_sort(impression)
    elif kind is Kind.RTL:
        result = rtl_aggregate(impression, comparator, spec.passes, spec.top_k, rng)
    elif kind is Kind.BUBBLE_FULL:
        result = bubble_sort_full(impression, comparator, spec.init, rng)
    elif kind is Kind.BOX_FILLING:
        result = box_filling(impression, comparator, rng)
    else:
        start = pointwise_sort(impression)
        w = min(spec.window, len(impression))
        result = window_rerank(start, comparator, kind, w, spec.skip, rng)
    expected = expected_comparisons(spec, len(impression))
    if result.comparisons_used != expected:
        raise AssertionError(
            f"{spec.label} used {result.comparisons_used} comparisons, expected {expected}"
        )
    return result


def standard_strategies(window: int = 3, skip: int = 2) -> list[StrategySpec]:
    """The strategy line-up of the inference-strategy comparison, in display order."""
    return [
        StrategySpec(Kind.POINTWISE),
        StrategySpec(Kind.BOX_FILLING),
        StrategySpec(Kind.BUBBLE_FULL, init=Init.RANDOM),
        StrategySpec(Kind.BUBBLE_FULL, init=Init.POINTWISE),
        StrategySpec(Kind.N_WINDOW, window=window),
        StrategySpec(Kind.S_WINDOW, window=window, skip=skip),
        StrategySpec(Kind.RTL, passes=1, top_k=3),
        StrategySpec(Kind.RTL, passes=1, top_k=5),
        StrategySpec(Kind.RTL, passes=1, top_k=10),
        StrategySpec(Kind.RTL, passes=2, top_k=5),
    ]
