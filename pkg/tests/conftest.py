import itertools

import numpy as np
import pytest

from varlenrank import _kernels
from varlenrank.core import Placement
from varlenrank.distribution import SuperRanking, pair_arrays, stable_exp_scores


def perm_probability(expm_flat: np.ndarray, perm) -> float:
    """Probability of drawing this exact pair ordering from the
    softmax-without-replacement super-ranking distribution."""
    total = expm_flat.sum()
    prob = 1.0
    for j in perm:
        prob *= expm_flat[j] / total
        total -= expm_flat[j]
    return prob


def kernel_sample_contrib(which: int, perm, scores, attract, exposure, config) -> np.ndarray:
    """Per-(d, l) contribution of one super-ranking through the compiled
    kernels (1 or 2)."""
    docs, lens = pair_arrays(config)
    expm = stable_exp_scores(scores)
    nd, L, K = config.num_docs, config.max_len, config.slots
    W, maxlen = 2 * L - 1, K + L - 1
    contrib = np.zeros((nd, L))
    perm = np.asarray(perm, dtype=np.int64)
    placed = np.zeros(nd, np.bool_)
    if which == 1:
        _kernels.vlpl1_sample(
            perm, docs, lens, expm, attract.values, exposure.grid, K, L,
            placed, np.zeros(K, np.int64), np.zeros(K, np.int64), np.zeros(K, np.int64),
            np.zeros(K + 1), np.zeros(L), np.zeros(K + 1), np.zeros((L, K + 1)),
            np.zeros(nd, np.int64), np.zeros(nd, np.int64), np.zeros(L, np.int64), contrib,
        )
    else:
        _kernels.vlpl2_sample(
            perm, docs, lens, expm, attract.values, exposure.grid, K, L,
            placed, np.zeros((W, maxlen), np.int64), np.zeros((W, maxlen), np.int64),
            np.zeros((W, maxlen), np.int64), np.zeros(W, np.int64),
            np.zeros((W, maxlen + 1)), np.zeros(L), np.zeros(K + 1), np.zeros((L, K + 1)),
            np.zeros((L, K)), np.zeros(nd, np.int64), np.zeros(nd, np.int64),
            np.zeros(L, np.int64), contrib,
        )
    return contrib


def all_perms_expectation(which: int, scores, attract, exposure, config) -> np.ndarray:
    """Exact expected value of a per-sample estimator: enumerate every
    super-ranking, weight by its sampling probability."""
    expm_flat = stable_exp_scores(scores).ravel()
    out = np.zeros((config.num_docs, config.max_len))
    for perm in itertools.permutations(range(config.num_pairs)):
        out += perm_probability(expm_flat, perm) * kernel_sample_contrib(
            which, perm, scores, attract, exposure, config
        )
    return out


def super_from_perm(perm, config) -> SuperRanking:
    docs, lens = pair_arrays(config)
    return SuperRanking(tuple(Placement(int(docs[j]), int(lens[j])) for j in perm))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
