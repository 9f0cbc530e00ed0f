"""Deterministic layout heuristics used as comparison points."""
from __future__ import annotations

import numpy as np

from .core import AttractTable, Placement, RankingConfig, VarRanking
from .exposure import ExposureTable


def sort_fixed_length(
    attract_hat: AttractTable, fixed_len: int, exposure: ExposureTable, config: RankingConfig
) -> VarRanking:
    """Sort documents by predicted attractiveness at one length and place
    them all at that length; stop when the next one would overflow the
    budget. Trailing slots stay empty."""
    if not (1 <= fixed_len <= config.max_len):
        raise ValueError(f"fixed_len {fixed_len} outside [1, {config.max_len}]")
    order = np.argsort(-attract_hat.values[:, fixed_len - 1], kind="stable")
    items: list[Placement] = []
    used = 0
    for d in order:
        if used + fixed_len > config.slots:
            break
        items.append(Placement(int(d), fixed_len))
        used += fixed_len
    return VarRanking(tuple(items))


def _sequential_layout(attract_hat, exposure, config, divide_by_len: bool) -> VarRanking:
    D, L, K = config.num_docs, config.max_len, config.slots
    placed = np.zeros(D, dtype=bool)
    used = 0
    items: list[Placement] = []
    while True:
        slot = used + 1
        best = None
        best_val = -np.inf
        # Iteration order fixes ties: shorter length first, then lower doc.
        for l in range(1, L + 1):
            if used + l > K:
                continue
            w = exposure.lookup(slot, l)
            for d in range(D):
                if placed[d]:
                    continue
                val = w * float(attract_hat.values[d, l - 1])
                if divide_by_len:
                    val /= l
                if val > best_val:
                    best_val = val
                    best = (d, l)
        if best is None:
            break
        d, l = best
        items.append(Placement(d, l))
        placed[d] = True
        used += l
    return VarRanking(tuple(items))


def greedy_layout(
    attract_hat: AttractTable, exposure: ExposureTable, config: RankingConfig
) -> VarRanking:
    """Repeatedly append the eligible pair with the highest exposure-weighted
    predicted attractiveness at the current slot."""
    return _sequential_layout(attract_hat, exposure, config, divide_by_len=False)


def slot_avg_layout(
    attract_hat: AttractTable, exposure: ExposureTable, config: RankingConfig
) -> VarRanking:
    """Like greedy, but ranks pairs on per-slot expected reward (the greedy
    criterion divided by the length)."""
    return _sequential_layout(attract_hat, exposure, config, divide_by_len=True)
