"""Sample-based gradient estimators of expected attractiveness w.r.t. scores.

Two estimators are provided. Estimator 1 credits the suffix reward of a
sample only to the exact (document, length) pair that was placed;
estimator 2 re-uses each sample for every length of a placed document by
re-truncating the super-ranking at the 2L-1 shifted budgets and weighting
each length's suffix with the probability that the document would have
entered at that length. Both share the risk/direct-reward accumulation.

Verification lives next to them: a central finite-difference oracle over
the exact objective, and an analytic score-function gradient computed by
full enumeration. The pure-Python per-sample contribution functions here
mirror the compiled kernels from the defining formulas and are used by
the tests to pin the kernels down sample by sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import AttractTable, RankingConfig, ScoreTable, VarRanking
from .distribution import (
    DEFAULT_CHUNK,
    SuperRanking,
    enumerate_complete_rankings,
    importance_weight,
    pair_arrays,
    rank_of_doc,
    ranking_prob,
    sample_perm_chunks,
    stable_exp_scores,
    transform_f,
    transform_f_substituted,
)
from .exposure import ExposureTable
from .objective import expected_attractiveness_exact, ranking_reward


@dataclass(frozen=True)
class GradientEstimate:
    grads: np.ndarray
    samples_used: int
    stderr: np.ndarray | None = None


@dataclass(frozen=True)
class HelperVars:
    """Per-sample accumulators: suffix rewards per shift, cumulative risk,
    cumulative direct-reward weight per length, plus the feasibility masks
    and softmax denominators they were built from."""

    pr: dict[int, np.ndarray]
    ri: np.ndarray
    dr: np.ndarray
    feasible: np.ndarray
    denominators: np.ndarray


def total_reward_g(
    ranking: VarRanking, attract: AttractTable, exposure: ExposureTable, from_index: int
) -> float:
    """Reward of the ranking's suffix starting at 1-based ``from_index``."""
    if not (1 <= from_index <= len(ranking) + 1):
        raise ValueError(f"from_index {from_index} outside [1, {len(ranking) + 1}]")
    starts = ranking.start_slots()
    total = 0.0
    for i in range(from_index - 1, len(ranking)):
        p = ranking.items[i]
        total += exposure.lookup(starts[i], p.length) * float(
            attract.values[p.doc, p.length - 1]
        )
    return total


def adjusted_reward_g_prime(
    ranking: VarRanking,
    attract: AttractTable,
    exposure: ExposureTable,
    from_index: int,
    shift: int,
) -> float:
    """Suffix reward with every start slot shifted by ``shift``; placements
    shifted above the top contribute zero."""
    if not (1 <= from_index <= len(ranking) + 1):
        raise ValueError(f"from_index {from_index} outside [1, {len(ranking) + 1}]")
    starts = ranking.start_slots()
    total = 0.0
    for i in range(from_index - 1, len(ranking)):
        p = ranking.items[i]
        s = starts[i] + shift
        if s < 1:
            continue
        total += exposure.lookup(s, p.length) * float(attract.values[p.doc, p.length - 1])
    return total


def _run_estimator(
    chunk_fn,
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    n_samples: int,
    seed,
    chunk: int,
) -> GradientEstimate:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    docs, lens = pair_arrays(config)
    expm = stable_exp_scores(scores)
    grad_sum = np.zeros((config.num_docs, config.max_len))
    grad_sumsq = np.zeros_like(grad_sum)
    for _, perms in sample_perm_chunks(scores, config, n_samples, seed, chunk):
        chunk_fn(
            perms, docs, lens, expm, attract.values, exposure.grid,
            config.slots, config.max_len, grad_sum, grad_sumsq,
        )
    mean = grad_sum / n_samples
    var = np.maximum(grad_sumsq / n_samples - mean**2, 0.0)
    stderr = np.sqrt(var / n_samples)
    return GradientEstimate(grads=mean, samples_used=n_samples, stderr=stderr)


def vlpl1_gradient(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    n_samples: int,
    seed,
    chunk: int = DEFAULT_CHUNK,
    _fault_bias: float = 0.0,
) -> GradientEstimate:
    """Monte-Carlo gradient, estimator 1. ``_fault_bias`` deliberately
    shifts the result and exists only so the verification suite can prove
    it would catch a broken estimator."""
    est = _run_estimator(
        _kernels.vlpl1_chunk, scores, attract, exposure, config, n_samples, seed, chunk
    )
    if _fault_bias:
        return GradientEstimate(est.grads + _fault_bias, est.samples_used, est.stderr)
    return est


def vlpl2_gradient(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    n_samples: int,
    seed,
    chunk: int = DEFAULT_CHUNK,
    _fault_bias: float = 0.0,
) -> GradientEstimate:
    """Monte-Carlo gradient, estimator 2 (suffix rewards shared across
    lengths via importance weights)."""
    est = _run_estimator(
        _kernels.vlpl2_chunk, scores, attract, exposure, config, n_samples, seed, chunk
    )
    if _fault_bias:
        return GradientEstimate(est.grads + _fault_bias, est.samples_used, est.stderr)
    return est


def finite_difference_gradient(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    epsilon: float = 1e-5,
) -> GradientEstimate:
    """Central differences of the exact objective per score entry."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = scores.values
    grads = np.zeros_like(base)
    for d in range(config.num_docs):
        for l in range(config.max_len):
            hi = base.copy()
            hi[d, l] += epsilon
            lo = base.copy()
            lo[d, l] -= epsilon
            grads[d, l] = (
                expected_attractiveness_exact(ScoreTable(hi), attract, exposure, config)
                - expected_attractiveness_exact(ScoreTable(lo), attract, exposure, config)
            ) / (2 * epsilon)
    return GradientEstimate(grads=grads, samples_used=0, stderr=None)


def enumeration_gradient(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> GradientEstimate:
    """Exact score-function gradient over all complete rankings:
    sum_y pi(y) R(y) sum_i (1[y_i = (d,l)] - pi(d,l | prefix_i))."""
    expm = stable_exp_scores(scores)
    D, L, K = config.num_docs, config.max_len, config.slots
    grads = np.zeros((D, L))
    for ranking in enumerate_complete_rankings(config):
        prob = ranking_prob(scores, ranking, config)
        reward = ranking_reward(ranking, attract, exposure).value
        score_fn = np.zeros((D, L))
        mask = np.ones((D, L), dtype=bool)
        used = 0
        for p in ranking.items:
            for l in range(1, L + 1):
                if used + l > K:
                    mask[:, l - 1] = False
            step_probs = np.where(mask, expm, 0.0) / expm[mask].sum()
            score_fn -= step_probs
            score_fn[p.doc, p.length - 1] += 1.0
            mask[p.doc, :] = False
            used += p.length
        grads += prob * reward * score_fn
    return GradientEstimate(grads=grads, samples_used=0, stderr=None)


def pl_rank_style_gradient_oracle(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> np.ndarray:
    """Independent REINFORCE-with-enumeration gradient for the L=1 case,
    written directly against the classic sequential-softmax ranking model
    (no shared code with the estimators above)."""
    import itertools

    if config.max_len != 1:
        raise ValueError("this oracle only covers max_len == 1")
    D, K = config.num_docs, config.slots
    depth = min(D, K)
    w = np.exp(scores.values[:, 0] - scores.values[:, 0].max())
    grads = np.zeros(D)
    for perm in itertools.permutations(range(D), depth):
        prob = 1.0
        remaining = np.ones(D, dtype=bool)
        score_fn = np.zeros(D)
        reward = 0.0
        for i, d in enumerate(perm):
            denom = w[remaining].sum()
            prob *= w[d] / denom
            score_fn -= np.where(remaining, w, 0.0) / denom
            score_fn[d] += 1.0
            remaining[d] = False
            reward += exposure.lookup(i + 1, 1) * float(attract.values[d, 0])
        grads += prob * reward * score_fn
    return grads.reshape(D, 1)


def _suffix_rewards(ranking: VarRanking, attract: AttractTable, exposure: ExposureTable):
    """G[i] = reward of the suffix starting at 0-based position i."""
    n = len(ranking)
    g = np.zeros(n + 1)
    starts = ranking.start_slots()
    for i in range(n - 1, -1, -1):
        p = ranking.items[i]
        g[i] = g[i + 1] + exposure.lookup(starts[i], p.length) * float(
            attract.values[p.doc, p.length - 1]
        )
    return g


def _risk_direct_contrib(
    ranking: VarRanking,
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> np.ndarray:
    """Direct-reward-minus-risk term per (d, l), straight from its defining
    sum: over every prefix position, the placement probability of (d, l)
    there times (its direct reward minus the suffix reward at stake)."""
    D, L, K = config.num_docs, config.max_len, config.slots
    expm = stable_exp_scores(scores)
    g = _suffix_rewards(ranking, attract, exposure)
    contrib = np.zeros((D, L))
    mask = np.ones((D, L), dtype=bool)
    used = 0
    starts = ranking.start_slots()
    for i, p in enumerate(ranking.items):
        for l in range(1, L + 1):
            if used + l > K:
                mask[:, l - 1] = False
        z = expm[mask].sum()
        q = np.where(mask, expm, 0.0) / z
        direct = np.zeros((D, L))
        for l in range(1, L + 1):
            if starts[i] + l - 1 <= K:
                direct[:, l - 1] = exposure.lookup(starts[i], l) * attract.values[:, l - 1]
        contrib += q * (direct - g[i])
        mask[p.doc, :] = False
        used += p.length
    return contrib


def vlpl1_sample_contrib(
    super_ranking: SuperRanking,
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> np.ndarray:
    """Reference per-sample contribution of estimator 1 (pure Python)."""
    result = transform_f(super_ranking, config.slots, config)
    ranking = result.ranking
    contrib = _risk_direct_contrib(ranking, scores, attract, exposure, config)
    g = _suffix_rewards(ranking, attract, exposure)
    for i, p in enumerate(ranking.items):
        contrib[p.doc, p.length - 1] += g[i + 1]
    return contrib


def vlpl2_sample_contrib(
    super_ranking: SuperRanking,
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> np.ndarray:
    """Reference per-sample contribution of estimator 2 (pure Python).

    The suffix reward for (d, l) is taken from the truly substituted
    transform of the same super-ranking with d forced to length l, and
    weighted by the softmax of d's scores over the lengths feasible at
    its placement position.
    """
    result = transform_f(super_ranking, config.slots, config)
    ranking = result.ranking
    contrib = _risk_direct_contrib(ranking, scores, attract, exposure, config)
    for d, obs_len in result.observed_lengths.items():
        rank = rank_of_doc(result, d)
        for l in range(1, config.max_len + 1):
            w = importance_weight(scores, result, d, l, config)
            if w == 0.0:
                continue
            if l == obs_len:
                sub = result
            else:
                sub = transform_f_substituted(super_ranking, d, l, config)
            g_sub = _suffix_rewards(sub.ranking, attract, exposure)
            contrib[d, l - 1] += w * g_sub[rank]
    return contrib


def compute_helper_vars(
    super_ranking: SuperRanking,
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> HelperVars:
    """Accumulator arrays for one sample, built from the public operations
    (used to cross-check the compiled kernels and their invariants)."""
    K, L, D = config.slots, config.max_len, config.num_docs
    expm = stable_exp_scores(scores)
    maxlen = K + L - 1
    pr: dict[int, np.ndarray] = {}
    for delta in range(-(L - 1), L):
        shifted = transform_f(super_ranking, K - delta, config)
        arr = np.zeros(maxlen + 1)
        for i in range(len(shifted.ranking), 0, -1):
            arr[i - 1] = adjusted_reward_g_prime(
                shifted.ranking, attract, exposure, i, delta
            )
        pr[delta] = arr
    base = transform_f(super_ranking, K, config)
    ranking = base.ranking
    m0 = len(ranking)
    starts = ranking.start_slots()
    feasible = np.zeros((m0, L), dtype=bool)
    denominators = np.zeros(m0)
    ri = np.zeros(m0 + 1)
    dr = np.zeros((L, m0 + 1))
    mask = np.ones((D, L), dtype=bool)
    used = 0
    for i, p in enumerate(ranking.items):
        for l in range(1, L + 1):
            if used + l > K:
                mask[:, l - 1] = False
            feasible[i, l - 1] = starts[i] + l - 1 <= K
        z = expm[mask].sum()
        denominators[i] = z
        ri[i + 1] = ri[i] + pr[0][i] / z
        for l in range(1, L + 1):
            th = exposure.lookup(starts[i], l) if feasible[i, l - 1] else 0.0
            dr[l - 1, i + 1] = dr[l - 1, i] + th / z
        mask[p.doc, :] = False
        used += p.length
    return HelperVars(pr=pr, ri=ri, dr=dr, feasible=feasible, denominators=denominators)
