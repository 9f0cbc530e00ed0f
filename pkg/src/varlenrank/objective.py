"""The expected-attractiveness objective and its exact oracles.

A ranking's reward is the sum of theta(s_i, l_i) * rho(d_i, l_i) over its
placements; the objective of a stochastic policy is the expectation of
that reward. Exact values come from exhaustive enumeration (small
instances only); the Monte-Carlo estimate uses the super-ranking sampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import AttractTable, RankingConfig, ScoreTable, VarRanking
from .distribution import (
    DEFAULT_CHUNK,
    enumerate_complete_rankings,
    pair_arrays,
    ranking_prob,
    sample_perm_chunks,
)
from .exposure import ExposureTable


@dataclass(frozen=True)
class RewardReport:
    value: float
    per_item: tuple[float, ...]


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_samples: int


def ranking_reward(
    ranking: VarRanking, attract: AttractTable, exposure: ExposureTable
) -> RewardReport:
    """Exposure-weighted attractiveness of one ranking."""
    per_item = []
    slot = 1
    for p in ranking.items:
        w = exposure.lookup(slot, p.length)
        per_item.append(w * float(attract.values[p.doc, p.length - 1]))
        slot += p.length
    return RewardReport(value=float(sum(per_item)), per_item=tuple(per_item))


def expected_attractiveness_exact(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
) -> float:
    """Sum of probability times reward over every complete ranking."""
    total = 0.0
    for ranking in enumerate_complete_rankings(config):
        total += ranking_prob(scores, ranking, config) * ranking_reward(
            ranking, attract, exposure
        ).value
    return total


def expected_attractiveness_mc(
    scores: ScoreTable,
    attract: AttractTable,
    exposure: ExposureTable,
    config: RankingConfig,
    n_samples: int,
    seed,
    chunk: int = DEFAULT_CHUNK,
) -> MCEstimate:
    """Mean reward over sampled rankings, with its standard error."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    docs, lens = pair_arrays(config)
    total = 0.0
    total_sq = 0.0
    rewards = np.zeros(chunk)
    for _, perms in sample_perm_chunks(scores, config, n_samples, seed, chunk):
        n = perms.shape[0]
        _kernels.reward_chunk(
            perms, docs, lens, attract.values, exposure.grid,
            config.slots, config.num_docs, rewards[:n],
        )
        total += rewards[:n].sum()
        total_sq += (rewards[:n] ** 2).sum()
    mean = total / n_samples
    var = max(total_sq / n_samples - mean**2, 0.0)
    stderr = float(np.sqrt(var / n_samples))
    return MCEstimate(value=float(mean), stderr=stderr, n_samples=n_samples)


def brute_force_optimal(
    attract: AttractTable, exposure: ExposureTable, config: RankingConfig
) -> tuple[VarRanking, float]:
    """Highest-reward complete ranking by exhaustive search.

    Ties break toward the lexicographically smallest (doc, length)
    sequence, which is the enumeration order.
    """
    best: VarRanking | None = None
    best_value = -np.inf
    for ranking in enumerate_complete_rankings(config):
        value = ranking_reward(ranking, attract, exposure).value
        if value > best_value:
            best, best_value = ranking, value
    assert best is not None
    return best, float(best_value)
