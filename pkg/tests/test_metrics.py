import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtlrank.core import ContractError, Impression, Ranking
from rtlrank.metrics import (
    DCG,
    MRR,
    MetricSpec,
    auc,
    auc_from_scores,
    auc_from_z,
    dcg_at_k,
    eval_additive,
    metric_vector,
    ndcg_from_z,
    reciprocal_rank,
)

binary = st.lists(st.integers(0, 1), min_size=2, max_size=12).filter(lambda z: 0 < sum(z) < len(z))


def test_mrr_single_relevant():
    assert eval_additive([0, 0, 1, 0], MRR) == pytest.approx(1 / 3)
    assert reciprocal_rank([0, 0, 1, 0]) == pytest.approx(1 / 3)


def test_dcg_natural_log():
    # relevant at ranks 2 and 4: 1/ln 3 + 1/ln 5
    assert eval_additive([0, 1, 0, 1], DCG) == pytest.approx(1 / math.log(3) + 1 / math.log(5), abs=1e-12)
    assert eval_additive([0, 1, 0, 1], DCG) == pytest.approx(1.5315741, abs=1e-6)


def test_dcg_base_two_and_ndcg():
    assert dcg_at_k([0, 1], 2, 2) == pytest.approx(1 / math.log2(3))
    assert ndcg_from_z([0, 1], 2, 2) == pytest.approx(0.6309298, abs=1e-6)
    # ideal [1,1,0,0]: 1 + 1/log2(3)
    expected = (1 / math.log2(3) + 1 / math.log2(5)) / (1 + 1 / math.log2(3))
    assert ndcg_from_z([0, 1, 0, 1], 4, 2) == pytest.approx(expected)


def test_auc_by_position():
    assert auc_from_z([1, 0, 1, 0]) == pytest.approx(0.75)
    assert auc_from_z([0, 1, 0, 1]) == pytest.approx(0.25)


def test_auc_score_ties_count_half():
    assert auc_from_scores([1, 0], [0.5, 0.5]) == pytest.approx(0.5)


def test_cutoff_zeroes_tail():
    v = metric_vector(MetricSpec("dcg", cutoff=2), 4)
    assert v[2] == 0 and v[3] == 0 and v[0] == pytest.approx(1 / math.log(2))


def test_non_additive_families_rejected():
    with pytest.raises(ContractError):
        eval_additive([1, 0], MetricSpec("ndcg"))
    with pytest.raises(ContractError):
        metric_vector(MetricSpec("auc"), 3)
    with pytest.raises(ContractError):
        MetricSpec("precision")


@given(binary)
def test_auc_matches_pair_count(z):
    pos = [i for i, v in enumerate(z) if v]
    neg = [i for i, v in enumerate(z) if not v]
    good = sum(p < n for p in pos for n in neg)
    assert auc_from_z(z) == pytest.approx(good / (len(pos) * len(neg)))


@given(binary)
def test_auc_position_equals_score_form(z):
    # scores strictly decreasing down the list
    scores = -np.arange(len(z), dtype=float)
    assert auc_from_z(z) == pytest.approx(auc_from_scores(z, scores))


@given(binary, st.sampled_from(["e", 2, 10]), st.sampled_from(["e", 2]))
def test_ndcg_independent_of_log_base(z, b1, b2):
    assert ndcg_from_z(z, len(z), b1) == pytest.approx(ndcg_from_z(z, len(z), b2))


@given(binary)
def test_metrics_bounded_and_ideal_is_one(z):
    assert 0 <= ndcg_from_z(z, len(z)) <= 1 + 1e-12
    ideal = sorted(z, reverse=True)
    assert ndcg_from_z(ideal, len(z)) == pytest.approx(1.0)
    assert auc_from_z(ideal) == pytest.approx(1.0)


def test_auc_of_ranking_and_impression():
    imp = Impression.from_arrays([0, 1, 0])
    assert auc(Ranking((1, 0, 2)), imp) == 1.0
    assert auc([0.1, 0.9, 0.3], imp) == 1.0


def test_metric_vector_non_increasing_exhaustive():
    for K in range(2, 9):
        for spec in (MRR, DCG, MetricSpec("dcg", log_base=2)):
            v = metric_vector(spec, K)
            assert np.all(np.diff(v) <= 0)
            for z in itertools.product([0, 1], repeat=K):
                assert eval_additive(z, spec) == pytest.approx(float(np.dot(v, z)))
