import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtlrank.comparators import CountingComparator, OracleComparator, OracleParams, TableComparator
from rtlrank.core import ContractError, Impression, Ranking, relevance_of
from rtlrank.strategies import (
    Init,
    Kind,
    StrategySpec,
    box_filling,
    bubble_sort_full,
    expected_comparisons,
    pointwise_sort,
    rtl_aggregate,
    rtl_pass,
    run_strategy,
    standard_strategies,
    window_rerank,
)

PERFECT = OracleParams(0.0, 1.0, 0.0)


def label_table(labels):
    """Deterministic comparator that prefers relevant items and keeps ties."""
    return TableComparator.from_impression(Impression.from_arrays(labels, prefs=labels))


def test_pointwise_sort_descending_and_stable():
    imp = Impression.from_arrays([0, 1, 0, 1], scores=[0.3, 0.9, 0.9, 0.1])
    assert pointwise_sort(imp).order == (1, 2, 0, 3)


def test_pointwise_sort_missing_score_named():
    imp = Impression(
        "i", Impression.from_arrays([0, 1], scores=[0.1, 0.2]).candidates[:1]
        + Impression.from_arrays([1], ids=["zz"]).candidates
    )
    with pytest.raises(ContractError, match="zz"):
        pointwise_sort(imp)


def test_rtl_pass_carries_relevant_from_bottom_to_top():
    labels = [0, 0, 1]
    out = rtl_pass(Ranking.identity(3), OracleComparator(labels, PERFECT), 3, np.random.default_rng(0))
    assert out.order == (2, 0, 1)
    assert out.comparisons_used == 2


def test_rtl_pass_bad_swap_moves_down_one_slot_only():
    labels = [1, 0, 0]
    out = rtl_pass(Ranking.identity(3), OracleComparator(labels, OracleParams(1.0, 0.0, 0.0)), 3, np.random.default_rng(0))
    assert out.order == (1, 0, 2)


def test_rtl_pass_leaves_tail_alone():
    labels = [0, 0, 0, 1, 0]
    out = rtl_pass(Ranking.identity(5), OracleComparator(labels, PERFECT), 3, np.random.default_rng(0))
    assert out.order == (0, 1, 2, 3, 4)
    assert out.comparisons_used == 2


def test_rtl_pass_top_k_bounds():
    with pytest.raises(ContractError):
        rtl_pass(Ranking.identity(3), label_table([1, 0, 0]), 4, None)
    with pytest.raises(ContractError):
        rtl_pass(Ranking.identity(3), label_table([1, 0, 0]), 1, None)


def test_rtl_aggregate_clips_top_k():
    imp = Impression.from_arrays([0, 0, 1], scores=[0.9, 0.5, 0.1])
    out = rtl_aggregate(imp, label_table(imp.labels), passes=1, top_k=10)
    assert out.order == (2, 0, 1)
    assert out.comparisons_used == 2


@pytest.mark.parametrize("K", range(2, 7))
def test_perfect_rtl_full_pass_finds_single_relevant(K):
    for start in range(K):
        labels = [0] * K
        labels[start] = 1
        comp = OracleComparator(labels, PERFECT)
        out = rtl_pass(Ranking.identity(K), comp, K, np.random.default_rng(start))
        assert labels[out.order[0]] == 1


@pytest.mark.parametrize("K", range(2, 7))
def test_bubble_sorts_every_start_and_label_pattern(K):
    for labels in itertools.product([0, 1], repeat=K):
        comp = label_table(labels)
        for perm in itertools.permutations(range(K)):
            out = bubble_sort_full(Ranking(perm), comp)
            expected = [i for i in perm if labels[i]] + [i for i in perm if not labels[i]]
            assert list(out.order) == expected
            assert out.comparisons_used == K * (K - 1) // 2


def test_bubble_random_init_needs_rng():
    imp = Impression.from_arrays([0, 1, 0], scores=[0.1, 0.2, 0.3])
    with pytest.raises(ContractError):
        bubble_sort_full(imp, label_table(imp.labels), Init.RANDOM)
    out = bubble_sort_full(imp, label_table(imp.labels), Init.RANDOM, np.random.default_rng(0))
    assert imp.labels[out.order[0]] == 1


def test_box_filling_ranks_by_wins():
    # preferences by strength: c2 > c0 > c1
    imp = Impression.from_arrays([0, 0, 1], scores=[0.9, 0.5, 0.1], prefs=[1.0, 0.0, 2.0])
    out = box_filling(imp, TableComparator.from_impression(imp))
    assert out.order == (2, 0, 1)
    assert out.comparisons_used == 3


def test_box_filling_ties_keep_pointwise_order():
    imp = Impression.from_arrays([0, 1, 0], scores=[0.2, 0.9, 0.5], prefs=[0.0, 0.0, 0.0])
    assert box_filling(imp, TableComparator.from_impression(imp)).order == (1, 2, 0)


def test_nwindow_w2_is_left_to_right_pass():
    labels = [0, 0, 0, 1]
    out = window_rerank(Ranking.identity(4), label_table(labels), Kind.N_WINDOW, w=2)
    assert out.order == (0, 1, 3, 2)
    assert out.comparisons_used == 3


def test_swindow_reorders_within_strided_groups():
    # slots 0,2 form one group and 1,3 another
    labels = [0, 0, 1, 1]
    out = window_rerank(Ranking.identity(4), label_table(labels), Kind.S_WINDOW, w=2, s=2)
    assert out.order == (2, 3, 0, 1)
    assert out.comparisons_used == 2


@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_window_special_cases(K, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, K)
    prefs = rng.normal(size=K)
    start = Ranking(tuple(rng.permutation(K)))
    comp = TableComparator.from_impression(Impression.from_arrays(labels, prefs=prefs))
    full = window_rerank(start, comp, Kind.N_WINDOW, w=K)
    assert full.order == box_filling(start, comp).order
    w = int(rng.integers(2, K + 1))
    assert window_rerank(start, comp, Kind.S_WINDOW, w=w, s=1).order == window_rerank(start, comp, Kind.N_WINDOW, w=w).order


@given(
    st.integers(2, 14),
    st.sampled_from(list(Kind)),
    st.integers(1, 3),
    st.integers(2, 12),
    st.integers(2, 5),
    st.integers(1, 4),
    st.sampled_from(list(Init)),
    st.integers(0, 2**32 - 1),
)
@settings(max_examples=200, deadline=None)
def test_comparison_counters_match_closed_form(K, kind, passes, top_k, window, skip, init, seed):
    spec = StrategySpec(kind, passes=passes, top_k=top_k, init=init, window=window, skip=skip)
    rng = np.random.default_rng(seed)
    labels = np.zeros(K, dtype=int)
    labels[rng.integers(K)] = 1
    imp = Impression.from_arrays(labels, scores=rng.random(K))
    comp = CountingComparator(OracleComparator(labels, OracleParams(0.3, 0.6)))
    out = run_strategy(spec, imp, comp, rng)
    assert comp.calls == out.comparisons_used == expected_comparisons(spec, K)
    assert sorted(out.order) == list(range(K))


def test_closed_form_counts():
    assert expected_comparisons(StrategySpec(Kind.RTL, 1, 5), 10) == 4
    assert expected_comparisons(StrategySpec(Kind.RTL, 2, 5), 10) == 8
    assert expected_comparisons(StrategySpec(Kind.BOX_FILLING), 10) == 45
    assert expected_comparisons(StrategySpec(Kind.BUBBLE_FULL), 10) == 45
    # windows [0,3) [2,5) ... [8,10): four of three slots and one of two
    assert expected_comparisons(StrategySpec(Kind.N_WINDOW, window=3), 10) == 4 * 3 + 1


def test_standard_lineup():
    labels = [s.label for s in standard_strategies()]
    assert labels[0] == "pointwise" and "rtl(m=2,top=5)" in labels and len(labels) == len(set(labels))


def test_strategy_spec_validation():
    with pytest.raises(ContractError):
        StrategySpec(Kind.RTL, passes=0)
    with pytest.raises(ContractError):
        StrategySpec(Kind.N_WINDOW, window=1)
    with pytest.raises(ValueError):
        StrategySpec("quicksort")


def test_refinement_never_changes_candidate_set():
    rng = np.random.default_rng(3)
    imp = Impression.from_arrays([0, 1, 0, 0, 1, 0], scores=rng.random(6))
    for spec in standard_strategies():
        out = run_strategy(spec, imp, OracleComparator(imp.labels, OracleParams(0.5, 0.5)), rng)
        assert sorted(relevance_of(out, imp).tolist()) == sorted(imp.labels)
