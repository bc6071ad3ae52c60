"""Markov-chain analysis of right-to-left refinement with a single relevant item.

State ``i`` (0-based here, rank ``i + 1``) means the relevant item sits at
rank ``i + 1``.  One RTL pass with bad-swap probability ``mu`` and good-swap
probability ``nu`` moves the chain according to :func:`build_transition_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ContractError
from .metrics import MRR, MetricSpec, metric_vector


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray
    mu: float
    nu: float
    top_k: int

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _check_prob(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ContractError(f"{name} must lie in [0, 1], got {x!r}")


def build_transition_matrix(K: int, mu: float, nu: float, top_k: int | None = None) -> TransitionMatrix:
    """One-pass transition matrix over single-relevant states.

    Row ``i`` is the distribution of the relevant item's rank after one pass
    when it starts at rank ``i``.  With ``n = top_k`` (default ``K``), for
    1-based ``i, j <= n``:

    * ``j > i + 1``: 0 (a pass moves the item down by at most one slot)
    * ``j = i + 1 <= n``: ``mu``
    * ``1 < j <= i < n``: ``(1-mu)(1-nu) nu**(i-j)``
    * ``1 < j <= i = n``: ``(1-nu) nu**(n-j)``
    * ``j = 1, i < n``: ``(1-mu) nu**(i-1)``
    * ``j = 1, i = n``: ``nu**(n-1)``

    States below ``top_k`` are never touched by the pass and are absorbing.
    """
    if K < 2:
        raise ContractError("K must be at least 2")
    _check_prob("mu", mu)
    _check_prob("nu", nu)
    n = K if top_k is None else top_k
    if not 2 <= n <= K:
        raise ContractError(f"top_k={top_k} outside 2..{K}")
    T = np.zeros((K, K))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if j > i + 1:
                continue
            if j == i + 1:
                v = mu
            elif j == 1:
                v = nu ** (n - 1) if i == n else (1 - mu) * nu ** (i - 1)
            elif i == n:
                v = (1 - nu) * nu ** (n - j)
            else:
                v = (1 - mu) * (1 - nu) * nu ** (i - j)
            T[i - 1, j - 1] = v
    for i in range(n, K):
        T[i, i] = 1.0
    T.setflags(write=False)
    return TransitionMatrix(T, float(mu), float(nu), n)


def as_distribution(pi, K: int | None = None) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1:
        raise ContractError("state distribution must be a vector")
    if K is not None and pi.size != K:
        raise ContractError(f"state distribution has {pi.size} entries, expected {K}")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12 * max(1, pi.size):
        raise ContractError(f"not a probability vector: {pi}")
    return pi


def _matrix(T) -> np.ndarray:
    return T.entries if isinstance(T, TransitionMatrix) else np.asarray(T, dtype=float)


def push_forward(pi, T, passes: int = 1) -> np.ndarray:
    """State distribution after ``passes`` transitions, by repeated vector-matrix products."""
    if passes < 0:
        raise ContractError("passes must be non-negative")
    M = _matrix(T)
    out = as_distribution(pi, M.shape[0])
    for _ in range(passes):
        out = out @ M
    return out


def _delta(delta, K: int) -> np.ndarray:
    if isinstance(delta, MetricSpec):
        return metric_vector(delta, K)
    d = np.asarray(delta, dtype=float)
    if d.shape != (K,):
        raise ContractError(f"metric vector has shape {d.shape}, expected ({K},)")
    return d


def expected_metric(pi, T, delta=MRR, passes: int = 1) -> float:
    """Expected metric ``pi T^passes delta``; ``passes=0`` is the pointwise expectation."""
    M = _matrix(T)
    return float(push_forward(pi, M, passes) @ _delta(delta, M.shape[0]))


def gain(pi, T, delta=MRR) -> float:
    """Expected improvement of one pass: ``pi (T - I) delta``."""
    M = _matrix(T)
    K = M.shape[0]
    pi = as_distribution(pi, K)
    return float(pi @ (M - np.eye(K)) @ _delta(delta, K))


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of a positive-gain condition check.

    ``holds`` is ``None`` when every constraint is vacuous.  ``bound`` is the
    largest ``mu`` the non-vacuous constraints allow (strictly below it), and
    ``tightest`` the 0-based index of the constraint that sets it.
    """

    holds: bool | None
    bound: float
    tightest: int | None
    violations: tuple[int, ...] = ()
    vacuous: tuple[int, ...] = ()
    distribution: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __bool__(self) -> bool:
        return bool(self.holds)


def theorem1_check(pi, mu: float, nu: float) -> ConditionVerdict:
    """Sufficient condition for a strictly positive one-pass MRR gain.

    Constraint ``i`` (for adjacent states ``i, i+1``) is ``pi[i] * mu <
    pi[i+1] * nu``, i.e. ``mu < nu * pi[i+1] / pi[i]``.  Every order-``k``
    component of the gain polynomial is a non-negative combination of these
    brackets, so the condition implies positive gain.  A constraint with
    ``pi[i] == 0`` has no ratio and is reported as vacuous; its bracket is
    never negative.
    """
    _check_prob("mu", mu)
    _check_prob("nu", nu)
    pi = np.asarray(pi, dtype=float)
    if pi.size < 2:
        raise ContractError("need at least two states")
    bound = np.inf
    tightest = None
    violations = []
    vacuous = []
    for i in range(pi.size - 1):
        if pi[i] == 0:
            vacuous.append(i)
            continue
        b = nu * pi[i + 1] / pi[i]
        if b < bound:
            bound, tightest = b, i
        if not pi[i] * mu < pi[i + 1] * nu:
            violations.append(i)
    holds = None if len(vacuous) == pi.size - 1 else not violations
    return ConditionVerdict(holds, float(bound), tightest, tuple(violations), tuple(vacuous), pi)


def inverted_ratio_condition(pi, mu: float, nu: float) -> ConditionVerdict:
    """The condition with the ratio the other way up: ``mu < nu * pi[i] / pi[i+1]``.

    Kept for comparison only.  It is not sufficient for a positive gain:
    ``pi = [0.9, 0.1], mu = 0.4, nu = 0.5`` satisfies it while the gain is
    ``(0.1*0.5 - 0.9*0.4)/2 < 0``.
    """
    pi = np.asarray(pi, dtype=float)
    bound = np.inf
    tightest = None
    violations = []
    vacuous = []
    for i in range(pi.size - 1):
        if pi[i + 1] == 0:
            vacuous.append(i)
            continue
        b = nu * pi[i] / pi[i + 1]
        if b < bound:
            bound, tightest = b, i
        if not mu < b:
            violations.append(i)
    holds = None if len(vacuous) == pi.size - 1 else not violations
    return ConditionVerdict(holds, float(bound), tightest, tuple(violations), tuple(vacuous), pi)


def corollary_check(pi, T, alpha: int, mu: float | None = None, nu: float | None = None) -> ConditionVerdict:
    """Apply :func:`theorem1_check` to ``pi T^alpha``: does pass ``alpha + 1`` still gain?"""
    if alpha < 0:
        raise ContractError("alpha must be non-negative")
    if isinstance(T, TransitionMatrix):
        mu = T.mu if mu is None else mu
        nu = T.nu if nu is None else nu
    if mu is None or nu is None:
        raise ContractError("mu and nu are required with a bare matrix")
    return theorem1_check(push_forward(pi, T, alpha), mu, nu)


def gain_decomposition(pi, mu: float, nu: float, K: int | None = None, metric: MetricSpec = MRR) -> np.ndarray:
    """Split the one-pass MRR gain into its homogeneous-degree parts ``G_1 .. G_{K-1}``.

    The gain is a polynomial of total degree ``K - 1`` in ``(mu, nu)``.  Its
    degree-``k`` part is::

        G_k = sum_{i=k}^{K-1} (pi_{i+1} nu^k - pi_i mu nu^(k-1)) / ((i-k+1)(i-k+2))

    with 1-based ``i``.  Only full-length passes (``top_k = K``) are covered.
    """
    if metric.family != "mrr" or metric.cutoff is not None:
        raise ContractError("the decomposition is derived for MRR only")
    _check_prob("mu", mu)
    _check_prob("nu", nu)
    pi = np.asarray(pi, dtype=float)
    K = pi.size if K is None else K
    if pi.size != K or K < 2:
        raise ContractError(f"pi must have K >= 2 entries, got {pi.size} for K={K}")
    out = np.zeros(K - 1)
    for k in range(1, K):
        total = 0.0
        for i in range(k, K):
            # pi is 0-based: pi_i -> pi[i-1]
            total += (pi[i] * nu**k - pi[i - 1] * mu * nu ** (k - 1)) / ((i - k + 1) * (i - k + 2))
        out[k - 1] = total
    return out
