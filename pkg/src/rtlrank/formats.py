"""Impression files, experiment configs, oracle estimation from data, and CSV/JSON reports.

An impression file holds one JSON object per line::

    {"id": "imp-1", "candidates": [{"id": "n1", "label": 1, "score": 0.8, "pref": 1.3}, ...]}

``score`` (pointwise relevance) and ``pref`` (Bradley-Terry strength) are optional.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .comparators import OracleParams, bradley_terry
from .core import CandidateRecord, ConfigError, ContractError, Impression, ParseError, validate_impression
from .priors import BetaScorePrior
from .strategies import Kind, StrategySpec


# --------------------------------------------------------------------------
# impression files


@dataclass
class ParseSummary:
    parsed: int = 0
    skipped: list[tuple[int, str, list[str]]] = field(default_factory=list)
    malformed: list[tuple[int, str]] = field(default_factory=list)


def _field(obj: dict, name: str, line: int, offset: int, where: str):
    if name not in obj:
        raise ParseError(f"{where}: missing field {name!r}", line, offset)
    return obj[name]


def _number(value, name: str, line: int, offset: int, where: str) -> float | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: field {name!r} must be a number, got {value!r}", line, offset)
    return float(value)


def parse_record(text: str, line: int = 0, offset: int = 0) -> Impression:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (column {exc.colno})", line, offset + exc.pos) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", line, offset)
    imp_id = str(_field(obj, "id", line, offset, "impression"))
    cands = _field(obj, "candidates", line, offset, f"impression {imp_id!r}")
    if not isinstance(cands, list):
        raise ParseError(f"impression {imp_id!r}: 'candidates' must be a list", line, offset)
    records = []
    for n, c in enumerate(cands):
        where = f"impression {imp_id!r} candidate {n}"
        if not isinstance(c, dict):
            raise ParseError(f"{where}: must be an object", line, offset)
        cid = str(_field(c, "id", line, offset, where))
        label = _field(c, "label", line, offset, where)
        if isinstance(label, bool) or label not in (0, 1):
            raise ParseError(f"{where}: label must be 0 or 1 (graded relevance unsupported), got {label!r}", line, offset)
        records.append(
            CandidateRecord(
                id=cid,
                label=int(label),
                score=_number(c.get("score"), "score", line, offset, where),
                pref=_number(c.get("pref"), "pref", line, offset, where),
            )
        )
    return Impression(imp_id, tuple(records))


def iter_records(path) -> Iterable[tuple[int, int, str]]:
    """Yield ``(line_number, byte_offset, text)`` for each non-blank line."""
    offset = 0
    with open(path, "rb") as fh:
        for number, raw in enumerate(fh, start=1):
            text = raw.decode("utf-8").strip()
            if text:
                yield number, offset, text
            offset += len(raw)


def parse_impressions(
    path,
    strict: bool = False,
    skip_malformed: bool = False,
    require_scores: bool = False,
    require_prefs: bool = False,
) -> tuple[list[Impression], ParseSummary]:
    """Parse and validate an impression file.

    Degenerate impressions (no positive, no negative, duplicate ids, missing
    required fields) are skipped and listed in the summary, unless ``strict``
    is set, in which case they raise :class:`ParseError`.  Malformed lines
    always raise unless ``skip_malformed`` is set.
    """
    summary = ParseSummary()
    out = []
    for line, offset, text in iter_records(path):
        try:
            imp = parse_record(text, line, offset)
        except ParseError as exc:
            if not skip_malformed:
                raise
            summary.malformed.append((line, str(exc)))
            continue
        problems = validate_impression(imp, require_scores=require_scores, require_prefs=require_prefs)
        if problems:
            if strict:
                raise ParseError(f"impression {imp.id!r}: " + "; ".join(problems), line, offset)
            summary.skipped.append((line, imp.id, problems))
            continue
        out.append(imp)
        summary.parsed += 1
    return out, summary


def impression_to_json(imp: Impression) -> str:
    cands = []
    for c in imp.candidates:
        rec = {"id": c.id, "label": c.label}
        if c.score is not None:
            rec["score"] = c.score
        if c.pref is not None:
            rec["pref"] = c.pref
        cands.append(rec)
    return json.dumps({"id": imp.id, "candidates": cands}, separators=(",", ":"))


def write_impressions(path, impressions: Iterable[Impression]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for imp in impressions:
            fh.write(impression_to_json(imp) + "\n")


# --------------------------------------------------------------------------
# estimating swap probabilities from stored preferences


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class OracleEstimate:
    params: OracleParams
    mu_pairs: int
    nu_pairs: int
    mu_ci: tuple[float, float]
    nu_ci: tuple[float, float]


def estimate_oracle_params(impressions: Sequence[Impression]) -> OracleEstimate:
    """Swap rates the thresholded preference model would produce on (positive, negative) pairs.

    Every positive/negative pair inside an impression is scored in both
    orientations: positive on the left (a swap there is a bad swap, counted
    towards ``mu``) and positive on the right (a swap is a good swap, counted
    towards ``nu``).  The deterministic rule swaps when the right item's
    Bradley-Terry probability strictly exceeds one half.
    """
    bad = good = n_mu = n_nu = 0
    for imp in impressions:
        if not imp.has_prefs:
            raise ContractError(f"impression {imp.id!r} lacks pref strengths")
        pos = [c.pref for c in imp.candidates if c.label == 1]
        neg = [c.pref for c in imp.candidates if c.label == 0]
        for dp in pos:
            for dn in neg:
                n_mu += 1
                n_nu += 1
                bad += bradley_terry(dn, dp) > 0.5
                good += bradley_terry(dp, dn) > 0.5
    if n_mu == 0:
        raise ContractError("no (positive, negative) pairs to estimate from")
    return OracleEstimate(
        OracleParams(bad / n_mu, good / n_nu),
        n_mu,
        n_nu,
        wilson_interval(bad, n_mu),
        wilson_interval(good, n_nu),
    )


# --------------------------------------------------------------------------
# experiment configuration


def parse_strategy(obj) -> StrategySpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict):
        raise ConfigError(f"strategy must be a name or an object, got {obj!r}")
    allowed = {f.name for f in fields(StrategySpec)}
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown strategy keys: {sorted(unknown)}")
    try:
        return StrategySpec(**obj)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad strategy {obj!r}: {exc}") from None


def _parse_oracle(obj) -> OracleParams:
    if not isinstance(obj, dict) or set(obj) - {"mu", "nu", "tie_swap"} or not {"mu", "nu"} <= set(obj):
        raise ConfigError(f"oracle must be an object with mu, nu and optional tie_swap, got {obj!r}")
    try:
        return OracleParams(**{k: float(v) for k, v in obj.items()})
    except ContractError as exc:
        raise ConfigError(str(exc)) from None


def _parse_prior(obj) -> BetaScorePrior:
    try:
        if isinstance(obj, str):
            return BetaScorePrior.parse(obj)
        if isinstance(obj, (list, tuple)) and len(obj) == 4:
            return BetaScorePrior(*(float(x) for x in obj))
    except ContractError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"prior must be 'a1,b1,a2,b2' or a list of four numbers, got {obj!r}")


@dataclass
class ExperimentConfig:
    K: int = 10
    priors: list[BetaScorePrior] = field(default_factory=lambda: [BetaScorePrior(2, 1, 1, 2)])
    oracles: list[OracleParams] | str = field(default_factory=lambda: [OracleParams(0.1, 0.9)])
    strategies: list[StrategySpec] = field(default_factory=lambda: [StrategySpec(Kind.RTL, 1, 5)])
    log_base: float | str = 2
    trials: int = 1000
    seed: int = 0
    tol: float = 1e-8
    n_positive: int = 1
    input: str | None = None
    out: str | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {f.name for f in fields(cls)}
        unknown = set(obj) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(obj)
        if "priors" in kw:
            kw["priors"] = [_parse_prior(p) for p in _as_list(kw["priors"], "priors")]
        if "oracles" in kw:
            if kw["oracles"] != "from-data":
                kw["oracles"] = [_parse_oracle(o) for o in _as_list(kw["oracles"], "oracles")]
        if "strategies" in kw:
            if kw["strategies"] == "all":
                from .strategies import standard_strategies

                kw["strategies"] = standard_strategies()
            else:
                kw["strategies"] = [parse_strategy(s) for s in _as_list(kw["strategies"], "strategies")]
        cfg = cls(**kw)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(obj)

    def check(self) -> None:
        for name, ok in (
            ("K", isinstance(self.K, int) and self.K >= 2),
            ("trials", isinstance(self.trials, int) and self.trials >= 1),
            ("seed", isinstance(self.seed, int) and self.seed >= 0),
            ("tol", isinstance(self.tol, (int, float)) and self.tol > 0),
            ("n_positive", isinstance(self.n_positive, int) and 1 <= self.n_positive < self.K),
            ("log_base", self.log_base in ("e", 2, 2.0, "2", 10, 10.0, "10")),
        ):
            if not ok:
                raise ConfigError(f"invalid {name}: {getattr(self, name)!r}")

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "priors": [str(p) for p in self.priors],
            "oracles": self.oracles if isinstance(self.oracles, str)
            else [{"mu": o.mu, "nu": o.nu, "tie_swap": o.tie_swap} for o in self.oracles],
            "strategies": [{"kind": s.kind.value, **s.params()} for s in self.strategies],
            "log_base": self.log_base,
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "n_positive": self.n_positive,
            "input": self.input,
            "out": self.out,
        }


def _as_list(value, name: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty list")
    return value


# --------------------------------------------------------------------------
# reports


def fmt(value) -> str:
    """Deterministic cell formatting; floats round-trip exactly."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(fmt(v) for v in value)
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def manifest(command: str, config: dict, seed: int | None) -> dict:
    import scipy

    from . import __version__

    return {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "rtlrank": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def write_manifest(path, command: str, config: dict, seed: int | None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest(command, config, seed), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


SIM_HEADER = (
    "K", "prior", "mu", "nu", "tie_swap", "strategy", "params", "seed", "trials", "n_positive",
    "comparisons_used", "log_base", "metric", "pointwise_mean", "pointwise_se", "refined_mean",
    "refined_se", "gain_mean", "gain_se", "analytic_pointwise", "analytic_refined", "analytic_gain",
)
HIST_HEADER = ("K", "prior", "mu", "nu", "strategy", "params", "seed", "stage", "rank", "count")


def simulation_rows(results) -> tuple[list[list], list[list]]:
    from .sim import METRICS

    rows, hist = [], []
    for r in results:
        a_gain = r.analytic_gain
        for m in METRICS:
            rows.append([
                r.K, str(r.prior), r.oracle.mu, r.oracle.nu, r.oracle.tie_swap, r.strategy.label,
                r.strategy.params(), r.seed, r.trials, r.n_positive, r.comparisons, r.log_base, m,
                r.pointwise[m].mean, r.pointwise[m].stderr, r.refined[m].mean, r.refined[m].stderr,
                r.gain[m].mean, r.gain[m].stderr,
                None if r.analytic_pointwise is None else r.analytic_pointwise[m],
                None if r.analytic_refined is None else r.analytic_refined[m],
                None if a_gain is None else a_gain[m],
            ])
        for stage, counts in (("pointwise", r.hist_before), ("refined", r.hist_after)):
            for rank, count in enumerate(counts, start=1):
                hist.append([r.K, str(r.prior), r.oracle.mu, r.oracle.nu, r.strategy.label,
                             r.strategy.params(), r.seed, stage, rank, int(count)])
    return rows, hist
