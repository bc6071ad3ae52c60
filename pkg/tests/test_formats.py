import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtlrank.comparators import OracleParams
from rtlrank.core import ConfigError, ContractError, Impression, ParseError
from rtlrank.formats import (
    ExperimentConfig,
    csv_text,
    estimate_oracle_params,
    fmt,
    impression_to_json,
    parse_impressions,
    parse_record,
    wilson_interval,
    write_impressions,
)
from rtlrank.strategies import Kind


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def record(imp_id, labels, **extra):
    cands = [{"id": f"c{i}", "label": l, **{k: v[i] for k, v in extra.items()}} for i, l in enumerate(labels)]
    return json.dumps({"id": imp_id, "candidates": cands})


def test_two_candidate_line(tmp_path):
    imps, summary = parse_impressions(write_lines(tmp_path / "a.jsonl", [record("i", [1, 0], score=[0.2, 0.1])]))
    assert len(imps) == 1 and summary.parsed == 1
    assert imps[0].labels == (1, 0) and imps[0].scores == (0.2, 0.1)


def test_missing_label_names_field_and_line(tmp_path):
    lines = [record("ok", [1, 0]), '{"id": "bad", "candidates": [{"id": "a"}]}']
    with pytest.raises(ParseError, match="'label'") as info:
        parse_impressions(write_lines(tmp_path / "a.jsonl", lines))
    assert info.value.line == 2
    assert info.value.offset == len(lines[0]) + 1


def test_invalid_json_reports_offset(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        parse_impressions(write_lines(tmp_path / "a.jsonl", ["{not json"]))
    _, summary = parse_impressions(write_lines(tmp_path / "b.jsonl", ["{not json", record("i", [1, 0])]), skip_malformed=True)
    assert summary.parsed == 1 and summary.malformed[0][0] == 1


def test_graded_labels_rejected():
    with pytest.raises(ParseError, match="graded"):
        parse_record(record("i", [2, 0]))


def test_all_negative_impression_skipped(tmp_path):
    path = write_lines(tmp_path / "a.jsonl", [record("keep", [1, 0]), record("drop", [0, 0, 0])])
    imps, summary = parse_impressions(path)
    assert [i.id for i in imps] == ["keep"]
    assert summary.skipped == [(2, "drop", ["no positive"])]
    with pytest.raises(ParseError, match="drop"):
        parse_impressions(path, strict=True)


candidate = st.fixed_dictionaries(
    {"label": st.integers(0, 1)},
    optional={"score": st.floats(allow_nan=False, allow_infinity=False), "pref": st.floats(-1e6, 1e6)},
)


@given(st.text(min_size=1, max_size=8), st.lists(candidate, min_size=1, max_size=6))
def test_round_trip(imp_id, cands):
    recs = [{"id": f"x{i}", **c} for i, c in enumerate(cands)]
    imp = parse_record(json.dumps({"id": imp_id, "candidates": recs}))
    assert parse_record(impression_to_json(imp)) == imp


def test_write_then_parse(tmp_path):
    imps = [Impression.from_arrays([1, 0, 0], scores=[0.5, 0.25, 0.125], prefs=[1.0, -1.0, 0.0], id=f"i{k}") for k in range(3)]
    write_impressions(tmp_path / "x.jsonl", imps)
    assert parse_impressions(tmp_path / "x.jsonl")[0] == imps


def test_estimate_perfect_and_adversarial():
    labels = [1, 0, 0, 1, 0]
    perfect = Impression.from_arrays(labels, prefs=labels)
    est = estimate_oracle_params([perfect])
    assert (est.params.mu, est.params.nu) == (0.0, 1.0)
    assert est.mu_pairs == est.nu_pairs == 6
    adverse = Impression.from_arrays(labels, prefs=[1 - l for l in labels])
    est = estimate_oracle_params([adverse])
    assert (est.params.mu, est.params.nu) == (1.0, 0.0)


def test_estimate_random_strengths_near_half():
    rng = np.random.default_rng(0)
    imps = [Impression.from_arrays([1, 1, 0, 0], prefs=rng.normal(size=4), id=str(k)) for k in range(2500)]
    est = estimate_oracle_params(imps)
    assert est.mu_pairs == 10_000
    assert est.mu_ci[0] <= 0.5 <= est.mu_ci[1]
    assert est.nu_ci[0] <= 0.5 <= est.nu_ci[1]


def test_estimate_needs_prefs():
    with pytest.raises(ContractError):
        estimate_oracle_params([Impression.from_arrays([1, 0])])
    with pytest.raises(ContractError):
        estimate_oracle_params([])


def test_wilson_interval_reference():
    # 8 of 10 at 95%: (0.4902, 0.9433)
    lo, hi = wilson_interval(8, 10)
    assert lo == pytest.approx(0.4902, abs=1e-4) and hi == pytest.approx(0.9433, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_config_parsing():
    cfg = ExperimentConfig.from_dict(
        {"K": 6, "priors": ["2,1,1,2", [1, 1, 1, 1]], "oracles": [{"mu": 0.1, "nu": 0.9}], "strategies": ["box", {"kind": "rtl", "passes": 2, "top_k": 5}]}
    )
    assert cfg.strategies[1].kind is Kind.RTL and cfg.strategies[1].passes == 2
    assert cfg.oracles == [OracleParams(0.1, 0.9)]
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    assert len(ExperimentConfig.from_dict({"strategies": "all"}).strategies) == 10


@pytest.mark.parametrize(
    "bad",
    [
        {"unknown": 1},
        {"K": 1},
        {"oracles": [{"mu": 2, "nu": 0.5}]},
        {"strategies": [{"kind": "rtl", "depth": 3}]},
        {"priors": ["1,2"]},
        {"log_base": 3},
        {"n_positive": 10},
    ],
)
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_fmt_is_exact_and_deterministic():
    assert fmt(0.1 + 0.2) == "0.30000000000000004"
    assert fmt(True) == "true" and fmt(None) == "" and fmt({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    assert csv_text(["a", "b"], [[1, 0.5]]) == "a,b\n1,0.5\n"
