"""Beta-distributed pointwise scores and the rank distribution they induce.

With one positive item scored from ``Beta(alpha_pos, beta_pos)`` and ``K - 1``
negatives from ``Beta(alpha_neg, beta_neg)``, the positive lands at rank ``k``
with probability

    C(K-1, k-1) * integral_0^1 (1 - F(u))^(k-1) F(u)^(K-k) f(u) du

where ``F`` is the negative-class CDF and ``f`` the positive-class density.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .core import ContractError, NumericalError


@dataclass(frozen=True)
class BetaScorePrior:
    alpha_pos: float
    beta_pos: float
    alpha_neg: float
    beta_neg: float

    def __post_init__(self):
        for name in ("alpha_pos", "beta_pos", "alpha_neg", "beta_neg"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ContractError(f"{name} must be positive and finite, got {value!r}")

    @classmethod
    def parse(cls, text: str) -> "BetaScorePrior":
        """Parse ``"a1,b1,a2,b2"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ContractError(f"prior needs four comma-separated numbers, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            raise ContractError(f"bad prior {text!r}: {exc}") from None

    def __str__(self) -> str:
        return f"{self.alpha_pos:g},{self.beta_pos:g},{self.alpha_neg:g},{self.beta_neg:g}"

    @property
    def positive(self):
        return stats.beta(self.alpha_pos, self.beta_pos)

    @property
    def negative(self):
        return stats.beta(self.alpha_neg, self.beta_neg)


@dataclass(frozen=True)
class BetaStateDistribution:
    pi: np.ndarray
    raw: np.ndarray
    abs_errors: np.ndarray
    normalization: float

    def __array__(self, dtype=None, copy=None):
        return self.pi if dtype is None else self.pi.astype(dtype)


def _breakpoints(prior: BetaScorePrior) -> list[float]:
    # steer subdivision towards where the positive density lives
    q = prior.positive.ppf([1e-9, 1e-4, 0.05, 0.5, 0.95, 1 - 1e-4, 1 - 1e-9])
    return sorted({float(x) for x in q if 0.0 < x < 1.0})


def _integrate(func, tol, limit, points):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        result = integrate.quad(func, 0.0, 1.0, epsabs=tol, epsrel=0.0, limit=limit, points=points, full_output=1)
    # quad appends a message only when it gives up
    ok = len(result) == 3 and result[1] <= tol
    return result[0], result[1], ok


def state_distribution_from_beta(
    K: int, prior: BetaScorePrior, tol: float = 1e-8, limit: int = 200
) -> BetaStateDistribution:
    """Rank distribution of the single positive item, by adaptive Gauss-Kronrod quadrature.

    Each state probability is integrated to absolute tolerance ``tol`` and the
    vector is renormalised; the normalisation factor must be within
    ``10 * tol * K`` of one.

    Raises
    ------
    NumericalError
        If any integral fails to converge, or the raw vector does not sum to
        one within the allowance.
    """
    if K < 2:
        raise ContractError("K must be at least 2")
    if not tol > 0:
        raise ContractError("tol must be positive")
    a1, b1, a2, b2 = prior.alpha_pos, prior.beta_pos, prior.alpha_neg, prior.beta_neg
    log_norm = special.betaln(a1, b1)
    points = _breakpoints(prior)
    raw = np.zeros(K)
    errs = np.zeros(K)
    for k in range(1, K + 1):
        coef = math.comb(K - 1, k - 1)

        def integrand(u, k=k):
            # quad never evaluates the endpoints, so the density is finite
            f = math.exp(special.xlogy(a1 - 1, u) + special.xlog1py(b1 - 1, -u) - log_norm)
            return coef * special.betaincc(a2, b2, u) ** (k - 1) * special.betainc(a2, b2, u) ** (K - k) * f

        value, err, ok = _integrate(integrand, tol, limit, None)
        if not ok and points:
            # narrow or lopsided densities: subdivide at the positive-class quantiles
            value, err, ok = _integrate(integrand, tol, limit, points)
        if not ok:
            raise NumericalError(
                f"quadrature for rank {k} of {K} did not converge: {value} +- {err}",
                estimate=value,
                error_bound=err,
            )
        raw[k - 1] = max(value, 0.0)
        errs[k - 1] = err
    total = raw.sum()
    if abs(total - 1.0) > 10 * tol * K:
        raise NumericalError(
            f"state probabilities sum to {total!r}, off by more than {10 * tol * K:g}",
            estimate=raw,
            error_bound=errs,
        )
    pi = raw / total
    pi.setflags(write=False)
    return BetaStateDistribution(pi, raw, errs, float(total))


@dataclass(frozen=True)
class MonotonicityVerdict:
    holds: bool | None
    ratios: np.ndarray
    first_violation: int | None


def monotonicity_check(pi, atol: float = 1e-9) -> MonotonicityVerdict:
    """Is every consecutive ratio ``pi[k] / pi[k+1]`` at most ``pi[0] / pi[1]``?

    Zero entries make the ratios undefined and give ``holds=None``.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.size < 2:
        raise ContractError("need at least two states")
    if np.any(pi <= 0):
        return MonotonicityVerdict(None, np.full(pi.size - 1, np.nan), None)
    ratios = pi[:-1] / pi[1:]
    bad = np.nonzero(ratios > ratios[0] + atol)[0]
    first = int(bad[0]) if bad.size else None
    return MonotonicityVerdict(first is None, ratios, first)


def sample_pointwise_scores(labels, prior: BetaScorePrior, rng: np.random.Generator) -> np.ndarray:
    """Independent beta draws: positives from the positive prior, negatives from the negative one."""
    labels = np.asarray(labels)
    out = np.empty(labels.size)
    pos = labels == 1
    out[pos] = rng.beta(prior.alpha_pos, prior.beta_pos, size=int(pos.sum()))
    out[~pos] = rng.beta(prior.alpha_neg, prior.beta_neg, size=int((~pos).sum()))
    return out


def fit_beta_moments(scores) -> tuple[float, float]:
    """Method-of-moments beta fit; a rough heuristic for scores in (0, 1)."""
    x = np.asarray(scores, dtype=float)
    if x.size < 2 or np.any((x <= 0) | (x >= 1)):
        raise ContractError("need at least two scores strictly inside (0, 1)")
    m = x.mean()
    v = x.var(ddof=1)
    if not 0 < v < m * (1 - m):
        raise ContractError(f"variance {v:g} incompatible with a beta distribution of mean {m:g}")
    c = m * (1 - m) / v - 1
    return float(m * c), float((1 - m) * c)


def fit_prior(labels, scores) -> BetaScorePrior:
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    a1, b1 = fit_beta_moments(scores[labels == 1])
    a2, b2 = fit_beta_moments(scores[labels == 0])
    return BetaScorePrior(a1, b1, a2, b2)
