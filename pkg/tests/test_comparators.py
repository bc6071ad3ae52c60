import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtlrank.comparators import (
    CountingComparator,
    OracleComparator,
    OracleParams,
    PreferenceTable,
    TableComparator,
    bradley_terry,
    oracle_compare,
)
from rtlrank.core import ContractError, Impression

finite = st.floats(-50, 50, allow_nan=False)


def test_bradley_terry_values():
    assert bradley_terry(1.0, 0.0) == pytest.approx(math.e / (math.e + 1), abs=1e-12)
    assert bradley_terry(1.0, 0.0) == pytest.approx(0.7310586, abs=1e-7)
    assert bradley_terry(0.0, 0.6) == pytest.approx(0.3543437, abs=1e-7)


@given(finite, finite)
def test_bradley_terry_complement(a, b):
    assert bradley_terry(a, b) + bradley_terry(b, a) == pytest.approx(1.0, abs=1e-12)


def test_bradley_terry_extreme_and_invalid():
    assert bradley_terry(1000.0, -1000.0) == 1.0
    with pytest.raises(ContractError):
        bradley_terry(float("nan"), 0.0)


def test_oracle_params_validated():
    with pytest.raises(ContractError):
        OracleParams(1.2, 0.5)


@pytest.mark.parametrize("left, right, attr", [(1, 0, "mu"), (0, 1, "nu"), (0, 0, "tie_swap"), (1, 1, "tie_swap")])
def test_oracle_swap_rate(left, right, attr):
    params = OracleParams(0.2, 0.7, 0.4)
    p = getattr(params, attr)
    rng = np.random.default_rng(11)
    n = 20000
    hits = sum(oracle_compare(left, right, params, rng) for _ in range(n))
    assert abs(hits / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_oracle_degenerate_rates_are_deterministic():
    rng = np.random.default_rng(0)
    perfect = OracleComparator([1, 0], OracleParams(0.0, 1.0))
    assert not any(perfect(0, 1, rng) for _ in range(100))
    assert all(perfect(1, 0, rng) for _ in range(100))


def test_preference_table_checks_complements():
    with pytest.raises(ContractError):
        PreferenceTable(pairwise={("a", "b"): 0.7, ("b", "a"): 0.4})
    t = PreferenceTable(pairwise={("a", "b"): 0.7})
    assert t.prob("b", "a") == pytest.approx(0.3)
    with pytest.raises(KeyError, match="'c'"):
        PreferenceTable(strengths={"a": 1.0}).prob("a", "c")
    with pytest.raises(ContractError):
        PreferenceTable()


def test_table_comparator_swaps_when_right_preferred():
    imp = Impression.from_arrays([0, 1], prefs=[0.0, 2.0])
    comp = TableComparator.from_impression(imp)
    assert comp(0, 1, None)
    assert not comp(1, 0, None)
    tie = TableComparator.from_impression(Impression.from_arrays([0, 1], prefs=[1.0, 1.0]))
    assert not tie(0, 1, None)


def test_counting_comparator():
    c = CountingComparator(lambda a, b, rng: False)
    for _ in range(7):
        c(0, 1, None)
    assert c.calls == 7
