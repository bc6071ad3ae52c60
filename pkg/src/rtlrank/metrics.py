"""Additive rank metrics (MRR, DCG), nDCG@k and AUC.

An additive metric scores a relevance vector ``z`` as ``sum_k discount(k) * z[k]``
with rank ``k`` starting at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .core import ContractError, Impression, Ranking, relevance_of

FAMILIES = ("mrr", "dcg", "ndcg", "auc")


def _log_base_value(log_base) -> float:
    if log_base in ("e", None):
        return math.e
    base = float(log_base)
    if not base > 1:
        raise ContractError(f"log base must exceed 1, got {log_base!r}")
    return base


@dataclass(frozen=True)
class MetricSpec:
    family: str = "mrr"
    log_base: float | str = "e"
    cutoff: int | None = None

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise ContractError(f"unknown metric family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        _log_base_value(self.log_base)
        if self.cutoff is not None and self.cutoff < 1:
            raise ContractError("cutoff must be a positive integer")
        if family in ("mrr", "dcg", "ndcg"):
            _check_discount(self, 64)

    @property
    def name(self) -> str:
        if self.family == "ndcg" and self.cutoff is not None:
            return f"ndcg@{self.cutoff}"
        return self.family

    def discount(self, rank: int | np.ndarray):
        rank = np.asarray(rank, dtype=float)
        if self.family == "mrr":
            return 1.0 / rank
        base = _log_base_value(self.log_base)
        return math.log(base) / np.log1p(rank)


def _check_discount(spec: MetricSpec, K: int) -> None:
    lam = spec.discount(np.arange(1, K + 1))
    if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
        raise ContractError(f"discount of {spec.name} is not positive and non-increasing on 1..{K}")


MRR = MetricSpec("mrr")
DCG = MetricSpec("dcg")


def eval_additive(z: Sequence[int], spec: MetricSpec = MRR) -> float:
    """Evaluate ``sum_k discount(k) * z_k`` for MRR or DCG."""
    if spec.family not in ("mrr", "dcg"):
        raise ContractError(f"{spec.name} is not an additive metric of a relevance vector")
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ContractError("empty relevance vector")
    k = len(z) if spec.cutoff is None else min(spec.cutoff, len(z))
    return float(np.dot(spec.discount(np.arange(1, k + 1)), z[:k]))


def metric_vector(spec: MetricSpec, K: int) -> np.ndarray:
    """Metric value of each single-relevant state: element ``i`` is the value with the positive at rank ``i + 1``."""
    if K < 2:
        raise ContractError("K must be at least 2")
    if spec.family not in ("mrr", "dcg"):
        raise ContractError(f"{spec.name} has no per-state metric vector")
    _check_discount(spec, K)
    delta = spec.discount(np.arange(1, K + 1))
    if spec.cutoff is not None:
        delta[spec.cutoff:] = 0.0
    return delta


def reciprocal_rank(z: Sequence[int]) -> float:
    """Mean reciprocal rank over the relevant items (the usual MIND-style MRR).

    Equals the additive MRR when exactly one item is relevant.
    """
    z = np.asarray(z, dtype=float)
    n_pos = z.sum()
    if n_pos == 0:
        raise ContractError("no relevant items")
    return float(np.dot(1.0 / np.arange(1, len(z) + 1), z) / n_pos)


def dcg_at_k(z: Sequence[int], k: int, log_base=2) -> float:
    z = np.asarray(z, dtype=float)[:k]
    base = _log_base_value(log_base)
    return float(np.sum(z * math.log(base) / np.log1p(np.arange(1, len(z) + 1))))


def ndcg_from_z(z: Sequence[int], k: int, log_base=2) -> float:
    z = np.asarray(z)
    if not 1 <= k:
        raise ContractError("k must be positive")
    ideal = dcg_at_k(np.sort(z)[::-1], k, log_base)
    if ideal == 0:
        raise ContractError("no positive labels; ideal DCG is zero")
    return dcg_at_k(z, k, log_base) / ideal


def ndcg_at_k(ranking: Ranking, impression: Impression, k: int, log_base=2) -> float:
    """DCG@k of ``ranking`` divided by DCG@k of the label-sorted ordering."""
    if not 1 <= k <= len(impression):
        raise ContractError(f"k={k} outside 1..{len(impression)}")
    return ndcg_from_z(relevance_of(ranking, impression), k, log_base)


def auc_from_z(z: Sequence[int]) -> float:
    """Fraction of (positive, negative) pairs with the positive ranked higher."""
    z = np.asarray(z)
    n_pos = int(z.sum())
    n_neg = len(z) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs at least one positive and one negative")
    # each negative contributes the number of positives seen above it
    neg_below = np.cumsum(1 - z)[z == 1]
    discordant = float(neg_below.sum())
    return 1.0 - discordant / (n_pos * n_neg)


def auc_from_scores(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Mann-Whitney AUC with mid-rank tie handling."""
    labels = np.asarray(labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs at least one positive and one negative")
    ranks = rankdata(np.asarray(scores, dtype=float))
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc(ranking_or_scores, impression: Impression) -> float:
    """AUC of a permutation (by rank position) or of a score sequence (mid-rank ties)."""
    if isinstance(ranking_or_scores, Ranking):
        return auc_from_z(relevance_of(ranking_or_scores, impression))
    scores = list(ranking_or_scores)
    if len(scores) != len(impression):
        raise ContractError("score count does not match candidate count")
    return auc_from_scores(impression.labels, scores)


def standard_report(z: Sequence[int], log_base=2, cutoffs=(5, 10)) -> dict[str, float]:
    """AUC, MRR and nDCG at each cutoff for one relevance vector."""
    z = np.asarray(z)
    row = {"auc": auc_from_z(z), "mrr": reciprocal_rank(z)}
    for k in cutoffs:
        row[f"ndcg@{k}"] = ndcg_from_z(z, min(k, len(z)), log_base)
    return row
