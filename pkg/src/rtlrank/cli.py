"""Command-line entry point: ``rtlrank {rerank,theory,simulate,sweep,estimate}``.

Exit codes: 0 success, 2 configuration error, 3 parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .comparators import OracleComparator, OracleParams, TableComparator
from .core import ConfigError, ContractError, NumericalError, ParseError, relevance_of
from .formats import (
    HIST_HEADER,
    SIM_HEADER,
    ExperimentConfig,
    estimate_oracle_params,
    parse_impressions,
    simulation_rows,
    write_csv,
    write_manifest,
)
from .markov import (
    build_transition_matrix,
    corollary_check,
    expected_metric,
    gain_decomposition,
    push_forward,
    inverted_ratio_condition,
)
from .metrics import MetricSpec, metric_vector, standard_report
from .priors import BetaScorePrior, monotonicity_check, state_distribution_from_beta
from .sim import ablation_sweep, default_workers, derive_rng, empirical_state_distribution, simulate_pipeline
from .strategies import Init, Kind, StrategySpec, run_strategy, standard_strategies

log = logging.getLogger("rtlrank")

EXIT_CONFIG, EXIT_PARSE, EXIT_NUMERICAL = 2, 3, 4

STRATEGY_NAMES = {
    "pointwise": Kind.POINTWISE,
    "rtl": Kind.RTL,
    "bubble": Kind.BUBBLE_FULL,
    "box": Kind.BOX_FILLING,
    "nwindow": Kind.N_WINDOW,
    "swindow": Kind.S_WINDOW,
}


def _log_base(text: str):
    if text == "e":
        return "e"
    if text in ("2", "10"):
        return int(text)
    raise argparse.ArgumentTypeError("log base must be e, 2 or 10")


def _prior(text: str) -> BetaScorePrior:
    try:
        return BetaScorePrior.parse(text)
    except ContractError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _strategies(args) -> list[StrategySpec]:
    if args.strategy == "all":
        return standard_strategies(args.window, args.skip)
    return [
        StrategySpec(
            STRATEGY_NAMES[args.strategy],
            passes=args.passes,
            top_k=args.top_k,
            init=Init(args.init),
            window=args.window,
            skip=args.skip,
        )
    ]


def _oracle(args) -> OracleParams | None:
    if args.mu is None and args.nu is None:
        return None
    if args.mu is None or args.nu is None:
        raise ConfigError("--mu and --nu go together")
    return OracleParams(args.mu, args.nu, args.tie_swap)


def _add_strategy_args(p: argparse.ArgumentParser, default: str = "rtl") -> None:
    p.add_argument("--strategy", choices=[*STRATEGY_NAMES, "all"], default=default)
    p.add_argument("--passes", type=int, default=1, help="RTL passes m")
    p.add_argument("--top-k", type=int, default=5, help="prefix length covered by each RTL pass")
    p.add_argument("--init", choices=[i.value for i in Init], default="pointwise", help="bubble sort start")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--skip", type=int, default=2)


def _add_oracle_args(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--mu", type=float, required=required, help="bad-swap probability")
    p.add_argument("--nu", type=float, required=required, help="good-swap probability")
    p.add_argument("--tie-swap", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtlrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rerank", help="apply strategies to an impression file")
    p.add_argument("--input", required=True)
    p.add_argument("--config", help="JSON config; its strategies/seed/log_base override flags")
    _add_strategy_args(p)
    _add_oracle_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-base", type=_log_base, default=2)
    p.add_argument("--out", default="rerank_out")
    p.add_argument("--strict", action="store_true", help="abort on degenerate impressions")

    p = sub.add_parser("theory", help="transition matrix, expected metrics and gain conditions")
    p.add_argument("--K", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pi", type=_floats, help="state distribution, comma-separated")
    group.add_argument("--prior", type=_prior, help="beta priors a1,b1,a2,b2")
    _add_oracle_args(p, required=True)
    p.add_argument("--passes", type=int, default=1, help="report 0..passes RTL passes")
    p.add_argument("--top-k", type=int)
    p.add_argument("--metric", choices=["mrr", "dcg"], default="mrr")
    p.add_argument("--log-base", type=_log_base, default="e")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo draws to cross-check the prior")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="theory_out")

    p = sub.add_parser("simulate", help="seeded end-to-end simulation of one configuration")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--prior", type=_prior, default=BetaScorePrior(2, 1, 1, 2))
    _add_oracle_args(p, required=True)
    _add_strategy_args(p)
    p.add_argument("--n-positive", type=int, default=1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--log-base", type=_log_base, default=2)
    p.add_argument("--out", default="simulate_out")

    p = sub.add_parser("sweep", help="grid of priors x oracles x strategies from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--trials", type=int, help="override the config trial count")
    p.add_argument("--out")

    p = sub.add_parser("estimate", help="estimate mu and nu from stored preference strengths")
    p.add_argument("--input", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    return parser


# --------------------------------------------------------------------------


def cmd_rerank(args) -> int:
    strategies = _strategies(args)
    seed, log_base = args.seed, args.log_base
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        strategies, seed, log_base = cfg.strategies, cfg.seed, cfg.log_base
    oracle = _oracle(args)
    needs_pairs = any(s.kind is not Kind.POINTWISE for s in strategies)
    impressions, summary = parse_impressions(
        args.input, strict=args.strict, require_scores=True, require_prefs=needs_pairs and oracle is None
    )
    for line, imp_id, problems in summary.skipped:
        log.warning("skipped impression %s (line %d): %s", imp_id, line, "; ".join(problems))
    if not impressions:
        raise ParseError("no usable impressions in input")

    out = Path(args.out)
    ranking_rows, metric_rows = [], []
    for spec in strategies:
        per_imp = []
        comps = []
        for imp in impressions:
            if oracle is not None:
                comparator = OracleComparator(imp.labels, oracle)
            elif spec.kind is Kind.POINTWISE:
                comparator = None
            else:
                comparator = TableComparator.from_impression(imp)
            rng = derive_rng(seed, imp.id, spec.label)
            ranking = run_strategy(spec, imp, comparator, rng)
            z = relevance_of(ranking, imp)
            per_imp.append(standard_report(z, log_base))
            comps.append(ranking.comparisons_used)
            ids = [imp.candidates[c].id for c in ranking.order]
            ranking_rows.append([imp.id, spec.label, spec.params(), seed, ranking.comparisons_used, ids])
        keys = list(per_imp[0])
        means = [float(np.mean([r[k] for r in per_imp])) for k in keys]
        metric_rows.append(
            [spec.label, spec.params(), seed, log_base, len(impressions), *means,
             float(np.mean(comps)), int(np.sum(comps)), "oracle" if oracle else "prefs"]
        )
        log.info("%s: %s", spec.label, dict(zip(keys, np.round(means, 5))))

    write_csv(out / "rankings.csv", ["impression", "strategy", "params", "seed", "comparisons_used", "order"], ranking_rows)
    write_csv(
        out / "metrics.csv",
        ["strategy", "params", "seed", "log_base", "impressions", *keys, "comparisons_mean",
         "comparisons_total", "comparator"],
        metric_rows,
    )
    config = {
        "input": args.input,
        "strategies": [{"kind": s.kind.value, **s.params()} for s in strategies],
        "oracle": None if oracle is None else vars(oracle).copy(),
        "log_base": log_base,
        "skipped": len(summary.skipped),
        "parsed": summary.parsed,
    }
    write_manifest(out / "manifest.json", "rerank", config, seed)
    print("strategy," + ",".join(keys) + ",comparisons_mean")
    for row in metric_rows:
        print(",".join(str(x) for x in [row[0], *row[5:10]]))
    return 0


def cmd_theory(args) -> int:
    K = args.K
    spec = MetricSpec(args.metric, log_base=args.log_base)
    delta = metric_vector(spec, K)
    top_k = K if args.top_k is None else args.top_k
    T = build_transition_matrix(K, args.mu, args.nu, top_k=top_k)
    out = Path(args.out)

    state_rows = None
    if args.prior is not None:
        dist = state_distribution_from_beta(K, args.prior, tol=args.tol)
        pi = dist.pi
        mono = monotonicity_check(pi)
        mc = empirical_state_distribution(K, args.prior, args.trials, args.seed) if args.trials > 0 else None
        state_rows = [
            [K, str(args.prior), k + 1, pi[k], dist.abs_errors[k],
             None if mc is None else mc.frequencies[k], None if mc is None else mc.stderr[k],
             None if k == K - 1 else mono.ratios[k]]
            for k in range(K)
        ]
        write_csv(out / "states.csv",
                  ["K", "prior", "rank", "pi", "quad_abs_error", "mc_frequency", "mc_stderr", "ratio_next"],
                  state_rows)
        log.info("normalisation factor %.3e; monotone ratios: %s", dist.normalization, mono.holds)
    else:
        pi = np.asarray(args.pi, dtype=float)
        if pi.size != K:
            raise ConfigError(f"--pi has {pi.size} entries but K={K}")
        if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
            raise ConfigError("--pi must be a probability vector")
        pi = pi / pi.sum()

    write_csv(out / "transition.csv", ["from_rank", "to_rank", "probability"],
              [[i + 1, j + 1, T.entries[i, j]] for i in range(K) for j in range(K)])

    base = expected_metric(pi, T, delta, 0)
    rows = []
    prev = base
    for p in range(args.passes + 1):
        value = expected_metric(pi, T, delta, p)
        verdict = corollary_check(pi, T, p)
        inverted = inverted_ratio_condition(push_forward(pi, T, p), args.mu, args.nu)
        rows.append([
            K, args.mu, args.nu, top_k, spec.name, args.log_base, p, push_forward(pi, T, p), value,
            value - base, value - prev, verdict.holds, verdict.bound, inverted.holds,
        ])
        prev = value
    write_csv(out / "summary.csv",
              ["K", "mu", "nu", "top_k", "metric", "log_base", "passes", "distribution", "expected_metric",
               "gain", "step_gain", "next_pass_condition", "mu_bound", "inverted_condition"], rows)

    if spec.family == "mrr" and top_k == K:
        parts = gain_decomposition(pi, args.mu, args.nu, K)
        write_csv(out / "decomposition.csv", ["K", "mu", "nu", "order", "component"],
                  [[K, args.mu, args.nu, k + 1, g] for k, g in enumerate(parts)])

    config = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    config["prior"] = None if args.prior is None else str(args.prior)
    write_manifest(out / "manifest.json", "theory", config, args.seed)
    print("passes,expected_metric,gain,next_pass_condition")
    for r in rows:
        print(f"{r[6]},{r[8]!r},{r[9]!r},{r[11]}")
    return 0


def _write_sim(out: Path, command: str, results, config: dict, seed: int) -> None:
    rows, hist = simulation_rows(results)
    write_csv(out / "results.csv", SIM_HEADER, rows)
    write_csv(out / "histogram.csv", HIST_HEADER, hist)
    write_manifest(out / "manifest.json", command, config, seed)


def cmd_simulate(args) -> int:
    oracle = _oracle(args)
    strategies = _strategies(args)
    results = [
        simulate_pipeline(args.K, args.prior, oracle, s, args.trials, args.seed, args.n_positive,
                          args.workers, args.log_base)
        for s in strategies
    ]
    config = {
        "K": args.K, "prior": str(args.prior), "oracle": vars(oracle).copy(),
        "strategies": [{"kind": s.kind.value, **s.params()} for s in strategies],
        "trials": args.trials, "n_positive": args.n_positive, "log_base": args.log_base,
    }
    _write_sim(Path(args.out), "simulate", results, config, args.seed)
    for r in results:
        print(f"{r.strategy.label}: mrr {r.pointwise['mrr'].mean:.5f} -> {r.refined['mrr'].mean:.5f} "
              f"(gain {r.gain['mrr'].mean:+.5f} +- {r.gain['mrr'].stderr:.5f})")
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.out = args.out
    oracles = cfg.oracles
    if oracles == "from-data":
        if not cfg.input:
            raise ConfigError("oracles 'from-data' needs an input file")
        imps, _ = parse_impressions(cfg.input, require_prefs=True)
        oracles = [estimate_oracle_params(imps).params]
    results = ablation_sweep(cfg.K, cfg.priors, oracles, cfg.strategies, cfg.trials, cfg.seed,
                             cfg.n_positive, args.workers, cfg.log_base)
    _write_sim(Path(cfg.out or "sweep_out"), "sweep", results, cfg.to_dict(), cfg.seed)
    print(f"{len(results)} cells written to {cfg.out or 'sweep_out'}")
    return 0


def cmd_estimate(args) -> int:
    imps, summary = parse_impressions(args.input, strict=args.strict, require_prefs=True)
    est = estimate_oracle_params(imps)
    row = [est.params.mu, est.mu_ci[0], est.mu_ci[1], est.mu_pairs,
           est.params.nu, est.nu_ci[0], est.nu_ci[1], est.nu_pairs, len(summary.skipped)]
    header = ["mu", "mu_low", "mu_high", "mu_pairs", "nu", "nu_low", "nu_high", "nu_pairs", "skipped"]
    if args.out:
        write_csv(Path(args.out) / "estimate.csv", header, [row])
    print(",".join(header))
    print(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    return 0


COMMANDS = {
    "rerank": cmd_rerank,
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = default_workers()
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
