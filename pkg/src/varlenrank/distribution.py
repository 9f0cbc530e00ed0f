"""The variable-length Plackett-Luce distribution over rankings.

Placements are drawn sequentially: at each step the probability of a
(document, length) pair is a softmax over all pairs whose document is
still unplaced and whose length fits the remaining slot budget. The
module provides exact probabilities and exhaustive enumeration for small
instances, plus the efficient sampler: draw an unconstrained ordering of
all |D|*L pairs (a super-ranking) and greedily reduce it to a valid
ranking, which leaves the distribution unchanged by Luce's choice axiom.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Placement, RankingConfig, ScoreTable, VarRanking, validate_ranking

SCORE_CLAMP = 50.0
DEFAULT_ENUM_CEILING = 10**7
DEFAULT_CHUNK = 1 << 16


class InstanceTooLargeError(ValueError):
    """Raised when exhaustive enumeration would exceed the guard ceiling."""


def pair_arrays(config: RankingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (doc, length) lookup for pair index p = d * L + (l - 1)."""
    L = config.max_len
    docs = np.repeat(np.arange(config.num_docs, dtype=np.int64), L)
    lens = np.tile(np.arange(1, L + 1, dtype=np.int64), config.num_docs)
    return docs, lens


def stable_scores(scores: ScoreTable) -> np.ndarray:
    """Center scores at their max and clamp; the distribution is invariant
    to the shift, and the clamp keeps exponentials finite."""
    vals = scores.values - scores.values.max()
    return np.clip(vals, -SCORE_CLAMP, SCORE_CLAMP)


def stable_exp_scores(scores: ScoreTable) -> np.ndarray:
    return np.exp(stable_scores(scores))


@dataclass(frozen=True)
class SuperRanking:
    """An ordering of all |D|*L pairs, sampled without budget or
    duplicate-document constraints."""

    items: tuple[Placement, ...]

    def __len__(self) -> int:
        return len(self.items)

    def validate(self, config: RankingConfig) -> None:
        if len(self.items) != config.num_pairs:
            raise ValueError(
                f"super-ranking has {len(self.items)} items, expected {config.num_pairs}"
            )
        if len({(p.doc, p.length) for p in self.items}) != config.num_pairs:
            raise ValueError("super-ranking repeats a (doc, length) pair")


@dataclass(frozen=True)
class TransformResult:
    """A valid ranking produced from a super-ranking, with bookkeeping:
    the super-ranking position of each placed item and the length at
    which each placed document was kept."""

    ranking: VarRanking
    source_positions: tuple[int, ...]
    observed_lengths: dict[int, int]


def _eligible_mask(partial: VarRanking, config: RankingConfig) -> np.ndarray:
    """Boolean (|D|, L) mask of pairs placeable after ``partial``."""
    mask = np.ones((config.num_docs, config.max_len), dtype=bool)
    used = partial.total_len
    for p in partial.items:
        mask[p.doc, :] = False
    for l in range(1, config.max_len + 1):
        if used + l > config.slots:
            mask[:, l - 1] = False
    return mask


def placement_prob(
    scores: ScoreTable, partial: VarRanking, cand: Placement, config: RankingConfig
) -> float:
    """Probability of placing ``cand`` next, given a partial ranking."""
    verdict = validate_ranking(partial, config)
    if not verdict.is_valid:
        raise ValueError(f"partial ranking invalid: {verdict.reason}")
    mask = _eligible_mask(partial, config)
    if not mask.any():
        raise ValueError("no eligible pair: the partial ranking is already complete")
    if not (0 <= cand.doc < config.num_docs and 1 <= cand.length <= config.max_len):
        return 0.0
    if not mask[cand.doc, cand.length - 1]:
        return 0.0
    expm = stable_exp_scores(scores)
    return float(expm[cand.doc, cand.length - 1] / expm[mask].sum())


def ranking_prob(scores: ScoreTable, ranking: VarRanking, config: RankingConfig) -> float:
    """Probability of a complete ranking: product of placement probabilities
    along the prefix chain."""
    verdict = validate_ranking(ranking, config)
    if not verdict.is_complete:
        raise ValueError(f"ranking is not valid-complete: {verdict.status} ({verdict.reason})")
    expm = stable_exp_scores(scores)
    mask = np.ones((config.num_docs, config.max_len), dtype=bool)
    used = 0
    prob = 1.0
    for p in ranking.items:
        for l in range(1, config.max_len + 1):
            if used + l > config.slots:
                mask[:, l - 1] = False
        prob *= expm[p.doc, p.length - 1] / expm[mask].sum()
        mask[p.doc, :] = False
        used += p.length
    return float(prob)


def count_complete_rankings(config: RankingConfig) -> int:
    """Exact count of valid-complete rankings, via dynamic programming over
    (documents placed, slots used)."""
    D, K, L = config.num_docs, config.slots, config.max_len
    memo: dict[tuple[int, int], int] = {}

    def rec(placed: int, used: int) -> int:
        if placed == D or used + 1 > K:
            return 1
        key = (placed, used)
        if key in memo:
            return memo[key]
        total = 0
        for l in range(1, min(L, K - used) + 1):
            total += (D - placed) * rec(placed + 1, used + l)
        memo[key] = total
        return total

    return rec(0, 0)


def enumerate_complete_rankings(
    config: RankingConfig, ceiling: int = DEFAULT_ENUM_CEILING
) -> list[VarRanking]:
    """All valid-complete rankings, in depth-first lexicographic (doc, length)
    order. Guarded: raises InstanceTooLargeError when the exact count
    exceeds ``ceiling``."""
    n = count_complete_rankings(config)
    if n > ceiling:
        raise InstanceTooLargeError(
            f"instance has {n} complete rankings, ceiling is {ceiling}"
        )
    D, K, L = config.num_docs, config.slots, config.max_len
    out: list[VarRanking] = []
    items: list[Placement] = []

    def rec(placed: frozenset, used: int):
        if len(placed) == D or used + 1 > K:
            out.append(VarRanking(tuple(items)))
            return
        for d in range(D):
            if d in placed:
                continue
            for l in range(1, min(L, K - used) + 1):
                items.append(Placement(d, l))
                rec(placed | {d}, used + l)
                items.pop()

    rec(frozenset(), 0)
    return out


def sample_perm_chunks(
    scores: ScoreTable, config: RankingConfig, n_samples: int, seed, chunk: int = DEFAULT_CHUNK
):
    """Yield (offset, perms) chunks of super-ranking permutations.

    Each permutation row is the descending order of Gumbel-perturbed
    scores, which draws exactly from the softmax-without-replacement
    distribution over all pairs. Generation order is fixed by the seed,
    so sample i is identical for any chunk size or worker count.
    """
    m = stable_scores(scores).ravel()
    rng = np.random.default_rng(seed)
    done = 0
    while done < n_samples:
        take = min(chunk, n_samples - done)
        noise = rng.gumbel(size=(take, m.size))
        perms = np.argsort(-(m[None, :] + noise), axis=1)
        yield done, perms
        done += take


def sample_super_ranking(scores: ScoreTable, rng, config: RankingConfig) -> SuperRanking:
    """Draw one super-ranking. ``rng`` is a seed or numpy Generator."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = stable_scores(scores).ravel()
    keys = m + rng.gumbel(size=m.size)
    perm = np.argsort(-keys)
    docs, lens = pair_arrays(config)
    return SuperRanking(tuple(Placement(int(docs[j]), int(lens[j])) for j in perm))


def transform_f(super_ranking: SuperRanking, budget: int, config: RankingConfig) -> TransformResult:
    """Reduce a super-ranking to a valid ranking for ``budget`` slots by
    keeping the first placeable pair of each document."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    placed: set[int] = set()
    used = 0
    items: list[Placement] = []
    positions: list[int] = []
    observed: dict[int, int] = {}
    for pos, p in enumerate(super_ranking.items):
        if p.doc in placed:
            continue
        if used + p.length <= budget:
            placed.add(p.doc)
            items.append(p)
            positions.append(pos)
            observed[p.doc] = p.length
            used += p.length
    return TransformResult(VarRanking(tuple(items)), tuple(positions), observed)


def transform_f_substituted(
    super_ranking: SuperRanking, doc: int, forced_len: int, config: RankingConfig
) -> TransformResult:
    """Like :func:`transform_f` with budget K, except that at the point the
    scan would place ``doc``, its length is overridden to ``forced_len``.
    If the forced length does not fit there, the document is dropped from
    the ranking entirely."""
    if not (1 <= forced_len <= config.max_len):
        raise ValueError(f"forced length {forced_len} outside [1, {config.max_len}]")
    budget = config.slots
    placed: set[int] = set()
    used = 0
    items: list[Placement] = []
    positions: list[int] = []
    observed: dict[int, int] = {}
    for pos, p in enumerate(super_ranking.items):
        if p.doc in placed:
            continue
        if used + p.length > budget:
            continue
        if p.doc == doc:
            # This is where the plain scan selects the document; swap in
            # the forced length, or drop the document if it cannot fit.
            placed.add(doc)
            if used + forced_len <= budget:
                items.append(Placement(doc, forced_len))
                positions.append(pos)
                observed[doc] = forced_len
                used += forced_len
            continue
        placed.add(p.doc)
        items.append(p)
        positions.append(pos)
        observed[p.doc] = p.length
        used += p.length
    return TransformResult(VarRanking(tuple(items)), tuple(positions), observed)


def rank_of_doc(result: TransformResult, doc: int) -> int:
    """1-based rank of ``doc`` in the transformed ranking; |y| when absent."""
    for i, p in enumerate(result.ranking.items):
        if p.doc == doc:
            return i + 1
    return len(result.ranking)


def rank_of_pair(result: TransformResult, doc: int, length: int) -> int:
    """1-based rank of ``doc`` if placed at exactly ``length``; |y| otherwise."""
    for i, p in enumerate(result.ranking.items):
        if p.doc == doc:
            return i + 1 if p.length == length else len(result.ranking)
    return len(result.ranking)


def last_feasible_rank(result: TransformResult, length: int, config: RankingConfig) -> int:
    """Largest 1-based position i with len(y_{1:i-1}) + length <= K."""
    used = 0
    last = 0
    for i, p in enumerate(result.ranking.items):
        if used + length <= config.slots:
            last = i + 1
        else:
            break
        used += p.length
    return last


def importance_weight(
    scores: ScoreTable, result: TransformResult, doc: int, length: int, config: RankingConfig
) -> float:
    """Probability that ``doc`` would have entered at ``length`` given the
    position where it was actually placed: a softmax of its scores over
    the lengths that fit there. Zero for lengths that do not fit."""
    if doc not in result.observed_lengths:
        raise ValueError(f"doc {doc} is not placed in the ranking")
    rank = rank_of_doc(result, doc)
    prefix_len = sum(p.length for p in result.ranking.items[: rank - 1])
    expm = stable_exp_scores(scores)
    feasible = np.array(
        [prefix_len + l <= config.slots for l in range(1, config.max_len + 1)]
    )
    denom = expm[doc][feasible].sum()
    if not feasible[length - 1]:
        return 0.0
    return float(expm[doc, length - 1] / denom)


def empirical_ranking_distribution(
    scores: ScoreTable, config: RankingConfig, n_samples: int, seed, chunk: int = DEFAULT_CHUNK
) -> dict[tuple, float]:
    """Frequencies of transformed rankings over ``n_samples`` draws, keyed
    by the ranking's (doc, length) tuple."""
    docs, lens = pair_arrays(config)
    maxlen = config.slots
    counts: dict[tuple, int] = {}
    out_docs = np.zeros((chunk, maxlen), np.int64)
    out_lens = np.zeros((chunk, maxlen), np.int64)
    out_counts = np.zeros(chunk, np.int64)
    for _, perms in sample_perm_chunks(scores, config, n_samples, seed, chunk):
        n = perms.shape[0]
        _kernels.scan_chunk(
            perms, docs, lens, config.num_docs, config.slots,
            out_docs[:n], out_lens[:n], out_counts[:n],
        )
        # Encode each ranking row as (doc+1, len) pairs padded with zeros so
        # identical rankings collapse under a single vectorized unique pass.
        enc = np.zeros((n, 2 * maxlen), np.int64)
        mask = np.arange(maxlen)[None, :] < out_counts[:n, None]
        enc[:, 0::2] = np.where(mask, out_docs[:n] + 1, 0)
        enc[:, 1::2] = np.where(mask, out_lens[:n], 0)
        rows, row_counts = np.unique(enc, axis=0, return_counts=True)
        for row, c in zip(rows, row_counts):
            key = tuple(
                (int(row[2 * i] - 1), int(row[2 * i + 1]))
                for i in range(maxlen)
                if row[2 * i] > 0
            )
            counts[key] = counts.get(key, 0) + int(c)
    return {k: v / n_samples for k, v in counts.items()}
