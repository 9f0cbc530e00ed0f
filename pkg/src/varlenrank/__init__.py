"""Joint optimization of document ordering and presentation lengths
under a fixed slot budget."""

from ._kernels import NUMBA_ENABLED, backend_name
from .core import (
    AttractTable,
    Placement,
    RankingConfig,
    ScoreTable,
    ValidationResult,
    VarRanking,
    start_slot,
    validate_ranking,
)
from .distribution import (
    InstanceTooLargeError,
    SuperRanking,
    TransformResult,
    enumerate_complete_rankings,
    importance_weight,
    last_feasible_rank,
    placement_prob,
    rank_of_doc,
    rank_of_pair,
    ranking_prob,
    sample_super_ranking,
    transform_f,
    transform_f_substituted,
)
from .exposure import (
    ExposureDomainError,
    ExposureTable,
    build_exposure_table,
    composite_exposure,
    load_exposure_table,
    theta_single,
)
from .gradients import (
    GradientEstimate,
    HelperVars,
    adjusted_reward_g_prime,
    enumeration_gradient,
    finite_difference_gradient,
    total_reward_g,
    vlpl1_gradient,
    vlpl2_gradient,
)
from .objective import (
    MCEstimate,
    RewardReport,
    brute_force_optimal,
    expected_attractiveness_exact,
    expected_attractiveness_mc,
    ranking_reward,
)
from .optimize import (
    AdamParams,
    AdamState,
    Scorer,
    greedy_decode,
    postprocess_optimize,
    train_inprocess,
    train_relevance_head,
)
from .baselines import greedy_layout, slot_avg_layout, sort_fixed_length

__version__ = "0.1.0"
