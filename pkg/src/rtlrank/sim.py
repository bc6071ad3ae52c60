"""Seeded Monte Carlo checks of the analytical model, and end-to-end pipeline simulation.

Every random stream is derived from a master seed and a stable index with
:class:`numpy.random.SeedSequence`, so results do not depend on how trials
are split across worker processes.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .comparators import OracleComparator, OracleParams
from .core import ContractError, Impression
from .markov import build_transition_matrix, push_forward
from .metrics import auc_from_z, ndcg_from_z, reciprocal_rank
from .priors import BetaScorePrior, sample_pointwise_scores, state_distribution_from_beta
from .strategies import Kind, StrategySpec, pointwise_sort, run_strategy

CHUNK = 256
WORKERS_ENV = "RTLRANK_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def derive_rng(master_seed: int, *keys) -> np.random.Generator:
    """Generator for ``keys`` under ``master_seed``; string keys are hashed stably."""
    entropy = [int(master_seed)]
    for k in keys:
        entropy.append(stable_hash(k) if isinstance(k, str) else int(k))
    return np.random.default_rng(np.random.SeedSequence(entropy))


# --------------------------------------------------------------------------
# z-level transition estimates


def rtl_pass_positions(pos: np.ndarray, mu: float, nu: float, top_k: int, rng: np.random.Generator) -> np.ndarray:
    """Batched RTL pass tracking only the (0-based) slot of a single relevant item.

    One uniform is drawn per comparison per trial, as :func:`oracle_compare` does.
    Pairs of two irrelevant items leave the slot unchanged whatever they do.
    """
    pos = pos.copy()
    for p in range(top_k - 2, -1, -1):
        u = rng.random(pos.size)
        down = (pos == p) & (u < mu)
        up = (pos == p + 1) & (u < nu)
        pos[down] = p + 1
        pos[up] = p
    return pos


@dataclass(frozen=True)
class EmpiricalTransition:
    estimate: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    trials: int


def empirical_transition_matrix(
    K: int, mu: float, nu: float, trials: int, seed: int = 0, top_k: int | None = None
) -> EmpiricalTransition:
    """Tabulate end states of ``trials`` single passes from each start state."""
    if trials < 1:
        raise ContractError("trials must be positive")
    OracleParams(mu, nu)
    n = K if top_k is None else top_k
    rng = derive_rng(seed, "transition", K, n)
    start = np.repeat(np.arange(K), trials)
    end = rtl_pass_positions(start, mu, nu, n, rng)
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (start, end), 1)
    est = counts / trials
    se = np.sqrt(est * (1 - est) / trials)
    return EmpiricalTransition(est, se, counts, trials)


@dataclass(frozen=True)
class EmpiricalStates:
    frequencies: np.ndarray
    stderr: np.ndarray
    draws: int


def empirical_state_distribution(
    K: int, prior: BetaScorePrior, draws: int, seed: int = 0, chunk: int = 200_000
) -> EmpiricalStates:
    """Rank frequencies of one positive among ``K - 1`` negatives, by sampling scores."""
    rng = derive_rng(seed, "states", K, str(prior))
    counts = np.zeros(K, dtype=np.int64)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        pos = rng.beta(prior.alpha_pos, prior.beta_pos, size=n)
        neg = rng.beta(prior.alpha_neg, prior.beta_neg, size=(n, K - 1))
        rank = (neg > pos[:, None]).sum(axis=1)
        counts += np.bincount(rank, minlength=K)
        done += n
    freq = counts / draws
    return EmpiricalStates(freq, np.sqrt(freq * (1 - freq) / draws), draws)


# --------------------------------------------------------------------------
# end-to-end pipeline


METRICS = ("auc", "mrr", "ndcg@5", "ndcg@10")


def _metrics(z: np.ndarray, log_base) -> list[float]:
    K = len(z)
    return [
        auc_from_z(z),
        reciprocal_rank(z),
        ndcg_from_z(z, min(5, K), log_base),
        ndcg_from_z(z, min(10, K), log_base),
    ]


def _inversions(z: np.ndarray) -> int:
    # irrelevant items ranked above each relevant one
    return int(np.cumsum(1 - z)[z == 1].sum())


@dataclass(frozen=True)
class _Job:
    K: int
    prior: BetaScorePrior
    oracle: OracleParams
    strategy: StrategySpec
    n_positive: int
    seed: int
    log_base: float | str
    start: int
    stop: int


def _run_chunk(job: _Job) -> dict[str, np.ndarray]:
    K, n = job.K, job.stop - job.start
    before = np.empty((n, len(METRICS)))
    after = np.empty((n, len(METRICS)))
    first_before = np.empty(n, dtype=np.int64)
    first_after = np.empty(n, dtype=np.int64)
    inv_before = np.empty(n, dtype=np.int64)
    inv_after = np.empty(n, dtype=np.int64)
    comps = np.empty(n, dtype=np.int64)
    for row, t in enumerate(range(job.start, job.stop)):
        rng = derive_rng(job.seed, t)
        labels = np.zeros(K, dtype=np.int64)
        labels[rng.permutation(K)[: job.n_positive]] = 1
        scores = sample_pointwise_scores(labels, job.prior, rng)
        imp = Impression.from_arrays(labels, scores, id=str(t))
        z0 = labels[list(pointwise_sort(imp).order)]
        ranking = run_strategy(job.strategy, imp, OracleComparator(labels, job.oracle), rng)
        z1 = labels[list(ranking.order)]
        before[row] = _metrics(z0, job.log_base)
        after[row] = _metrics(z1, job.log_base)
        first_before[row] = int(np.argmax(z0))
        first_after[row] = int(np.argmax(z1))
        inv_before[row] = _inversions(z0)
        inv_after[row] = _inversions(z1)
        comps[row] = ranking.comparisons_used
    return {
        "before": before,
        "after": after,
        "first_before": first_before,
        "first_after": first_after,
        "inv_before": inv_before,
        "inv_after": inv_after,
        "comparisons": comps,
    }


@dataclass(frozen=True)
class MetricEstimate:
    mean: float
    stderr: float

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - 1.959963984540054 * self.stderr, self.mean + 1.959963984540054 * self.stderr)


def _estimate(x: np.ndarray) -> MetricEstimate:
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    return MetricEstimate(float(x.mean()), se)


@dataclass(frozen=True)
class SimulationResult:
    K: int
    prior: BetaScorePrior
    oracle: OracleParams
    strategy: StrategySpec
    trials: int
    seed: int
    n_positive: int
    log_base: float | str
    pointwise: dict[str, MetricEstimate]
    refined: dict[str, MetricEstimate]
    gain: dict[str, MetricEstimate]
    analytic_pointwise: dict[str, float] | None
    analytic_refined: dict[str, float] | None
    hist_before: np.ndarray
    hist_after: np.ndarray
    comparisons: float
    inversion_increases: int
    rank1_losses: int
    raw: dict[str, np.ndarray] = field(repr=False, compare=False, default_factory=dict)

    @property
    def analytic_gain(self) -> dict[str, float] | None:
        if self.analytic_refined is None:
            return None
        return {m: self.analytic_refined[m] - self.analytic_pointwise[m] for m in METRICS}


def state_metric_vectors(K: int, log_base=2) -> dict[str, np.ndarray]:
    """Per-state value of each report metric when exactly one item is relevant."""
    r = np.arange(1, K + 1)
    out = {"auc": (K - r) / (K - 1), "mrr": 1.0 / r}
    for cut in (5, 10):
        z = np.eye(K)
        out[f"ndcg@{cut}"] = np.array([ndcg_from_z(z[i], min(cut, K), log_base) for i in range(K)])
    return out


def analytic_prediction(
    K: int, prior: BetaScorePrior, oracle: OracleParams, strategy: StrategySpec, log_base=2, tol: float = 1e-10
) -> tuple[dict[str, float], dict[str, float]] | None:
    """Expected metrics before and after ``strategy`` when there is one relevant item.

    Only the pointwise and RTL strategies have a transition-matrix model.
    """
    if strategy.kind not in (Kind.POINTWISE, Kind.RTL):
        return None
    pi = state_distribution_from_beta(K, prior, tol=tol).pi
    vectors = state_metric_vectors(K, log_base)
    if strategy.kind is Kind.RTL:
        T = build_transition_matrix(K, oracle.mu, oracle.nu, top_k=min(strategy.top_k, K))
        after = push_forward(pi, T, strategy.passes)
    else:
        after = pi
    before = {m: float(pi @ v) for m, v in vectors.items()}
    return before, {m: float(after @ v) for m, v in vectors.items()}


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]


def simulate_pipeline(
    K: int,
    prior: BetaScorePrior,
    oracle: OracleParams,
    strategy: StrategySpec,
    trials: int,
    seed: int = 0,
    n_positive: int = 1,
    workers: int | None = None,
    log_base=2,
    keep_raw: bool = False,
) -> SimulationResult:
    """Sample impressions from ``prior``, rank pointwise, refine with ``strategy``, and score both.

    Trial ``t`` draws everything from its own stream keyed by ``(seed, t)``.
    """
    if trials < 1:
        raise ContractError("trials must be positive")
    if not 1 <= n_positive < K:
        raise ContractError(f"n_positive={n_positive} must be in 1..{K - 1}")
    workers = default_workers() if workers is None else workers
    jobs = [_Job(K, prior, oracle, strategy, n_positive, seed, log_base, a, b) for a, b in _chunks(trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    raw = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}

    before, after = raw["before"], raw["after"]
    pointwise = {m: _estimate(before[:, i]) for i, m in enumerate(METRICS)}
    refined = {m: _estimate(after[:, i]) for i, m in enumerate(METRICS)}
    gain = {m: _estimate(after[:, i] - before[:, i]) for i, m in enumerate(METRICS)}
    analytic = analytic_prediction(K, prior, oracle, strategy, log_base) if n_positive == 1 else None
    return SimulationResult(
        K=K,
        prior=prior,
        oracle=oracle,
        strategy=strategy,
        trials=trials,
        seed=seed,
        n_positive=n_positive,
        log_base=log_base,
        pointwise=pointwise,
        refined=refined,
        gain=gain,
        analytic_pointwise=None if analytic is None else analytic[0],
        analytic_refined=None if analytic is None else analytic[1],
        hist_before=np.bincount(raw["first_before"], minlength=K),
        hist_after=np.bincount(raw["first_after"], minlength=K),
        comparisons=float(raw["comparisons"].mean()),
        inversion_increases=int(np.sum(raw["inv_after"] > raw["inv_before"])),
        rank1_losses=int(np.sum((raw["first_before"] == 0) & (raw["first_after"] != 0))),
        raw=raw if keep_raw else {},
    )


def ablation_sweep(
    K: int,
    priors: list[BetaScorePrior],
    oracles: list[OracleParams],
    strategies: list[StrategySpec],
    trials: int,
    seed: int = 0,
    n_positive: int = 1,
    workers: int | None = None,
    log_base=2,
) -> list[SimulationResult]:
    """Run :func:`simulate_pipeline` over the full grid; cell ``c`` uses seed ``(seed, c)``."""
    if not priors or not oracles or not strategies:
        raise ContractError("every grid axis needs at least one entry")
    results = []
    cell = 0
    for prior in priors:
        for oracle in oracles:
            for strategy in strategies:
                cell_seed = int(np.random.SeedSequence([seed, cell]).generate_state(1)[0])
                results.append(
                    simulate_pipeline(K, prior, oracle, strategy, trials, cell_seed, n_positive, workers, log_base)
                )
                cell += 1
    return results
