"""Pointwise initialisation plus right-to-left pairwise refinement for ranking, with its Markov-chain theory."""

__version__ = "0.1.0"

from .comparators import OracleComparator, OracleParams, PreferenceTable, TableComparator, bradley_terry
from .core import (
    CandidateRecord,
    ConfigError,
    ContractError,
    Impression,
    NumericalError,
    ParseError,
    Ranking,
    RankingError,
    relevance_of,
    validate_impression,
)
from .markov import (
    build_transition_matrix,
    corollary_check,
    expected_metric,
    gain,
    gain_decomposition,
    push_forward,
    theorem1_check,
)
from .metrics import DCG, MRR, MetricSpec, auc, eval_additive, ndcg_at_k, reciprocal_rank
from .priors import BetaScorePrior, monotonicity_check, state_distribution_from_beta
from .strategies import (
    Init,
    Kind,
    StrategySpec,
    box_filling,
    bubble_sort_full,
    pointwise_sort,
    rtl_aggregate,
    rtl_pass,
    run_strategy,
    window_rerank,
)
