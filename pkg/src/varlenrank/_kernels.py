"""Monte-Carlo inner loops, JIT-compiled with numba when available.

Every kernel is written as a plain numpy function; when numba is
installed and the environment variable ``VARLENRANK_NUMBA`` is not set
to ``0``/``false``/``off``, the functions are wrapped with ``@njit``.
Both paths execute the identical statements in the identical order, so
results are bit-for-bit equal; the fallback is simply slower. Use
``scripts/benchmark_backends.py`` to compare the two.

Pair indexing convention used throughout: pair ``p = d * L + (l - 1)``
for document ``d`` (0-based) and length ``l`` (1-based).
"""
from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("VARLENRANK_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

if _want_numba:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # noqa: D103 - identity decorator fallback
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def python_impl(fn):
    """The uncompiled implementation of a kernel (for fallback benchmarks)."""
    return getattr(fn, "py_func", fn)


@njit(cache=True)
def scan_budget(perm, pair_doc, pair_len, n_docs, budget, placed, out_idx):
    """Greedy scan of a super-ranking: place each pair whose document is
    still unplaced and whose length fits the remaining budget. Returns the
    number of placed pairs; their pair indices are written to ``out_idx``."""
    placed[:] = False
    used = 0
    count = 0
    for k in range(perm.shape[0]):
        j = perm[k]
        d = pair_doc[j]
        l = pair_len[j]
        if placed[d]:
            continue
        if used + l <= budget:
            placed[d] = True
            out_idx[count] = j
            count += 1
            used += l
    return count


@njit(cache=True)
def scan_chunk(perms, pair_doc, pair_len, n_docs, budget, out_docs, out_lens, out_counts):
    """Budget scan of many super-rankings; emits (doc, len) rows per sample."""
    placed = np.zeros(n_docs, np.bool_)
    for t in range(perms.shape[0]):
        placed[:] = False
        used = 0
        cnt = 0
        for k in range(perms.shape[1]):
            j = perms[t, k]
            d = pair_doc[j]
            l = pair_len[j]
            if placed[d]:
                continue
            if used + l <= budget:
                placed[d] = True
                out_docs[t, cnt] = d
                out_lens[t, cnt] = l
                cnt += 1
                used += l
        out_counts[t] = cnt


@njit(cache=True)
def reward_chunk(perms, pair_doc, pair_len, rho, theta, budget, n_docs, out):
    """Exposure-weighted attractiveness of the budget-K ranking of each sample."""
    placed = np.zeros(n_docs, np.bool_)
    for t in range(perms.shape[0]):
        placed[:] = False
        used = 0
        r = 0.0
        for k in range(perms.shape[1]):
            j = perms[t, k]
            d = pair_doc[j]
            l = pair_len[j]
            if placed[d]:
                continue
            if used + l <= budget:
                placed[d] = True
                r += rho[d, l - 1] * theta[used, l - 1]
                used += l
        out[t] = r
    return 0


@njit(cache=True)
def vlpl1_sample(
    perm, pair_doc, pair_len, expm, rho, theta, K, L,
    placed, docs0, lens0, starts0, pr0, sl, ri, dr, rank0, obs_len, rkl, contrib,
):
    """Per-(d, l) gradient contribution of one sampled ranking, estimator 1.

    The sampled super-ranking ``perm`` is reduced to the budget-K ranking
    y0. The contribution is the suffix reward after the position where
    (d, l) itself was placed, plus exp(m(d, l)) times the accumulated
    direct-reward weight minus the accumulated risk, both cut off at the
    last position where the pair was still placeable.
    """
    nd = expm.shape[0]
    placed[:] = False
    used = 0
    m0 = 0
    for k in range(perm.shape[0]):
        j = perm[k]
        d = pair_doc[j]
        l = pair_len[j]
        if placed[d]:
            continue
        if used + l <= K:
            placed[d] = True
            docs0[m0] = d
            lens0[m0] = l
            starts0[m0] = used + 1
            used += l
            m0 += 1

    pr0[m0] = 0.0
    for i in range(m0 - 1, -1, -1):
        pr0[i] = pr0[i + 1] + rho[docs0[i], lens0[i] - 1] * theta[starts0[i] - 1, lens0[i] - 1]

    for l in range(L):
        s = 0.0
        for d in range(nd):
            s += expm[d, l]
        sl[l] = s
    ri[0] = 0.0
    for l in range(L):
        dr[l, 0] = 0.0
    rank0[:] = m0
    obs_len[:] = 0
    for i in range(m0):
        d0 = docs0[i]
        l0 = lens0[i]
        s0 = starts0[i]
        rank0[d0] = i + 1
        obs_len[d0] = l0
        sp = 0.0
        for l in range(L):
            sp += sl[l]
        ri[i + 1] = ri[i] + pr0[i] / sp
        rem_here = K - s0 + 1
        rem_next = K - (s0 + l0) + 1
        for l in range(1, L + 1):
            th = theta[s0 - 1, l - 1] if l <= rem_here else 0.0
            dr[l - 1, i + 1] = dr[l - 1, i] + th / sp
            if l <= rem_next:
                sl[l - 1] -= expm[d0, l - 1]
            else:
                sl[l - 1] = 0.0

    for l in range(1, L + 1):
        r = 0
        for i in range(m0):
            if starts0[i] - 1 + l <= K:
                r = i + 1
            else:
                break
        rkl[l - 1] = r

    for d in range(nd):
        r1 = rank0[d]
        for l in range(1, L + 1):
            r2 = r1 if r1 < rkl[l - 1] else rkl[l - 1]
            val = expm[d, l - 1] * (rho[d, l - 1] * dr[l - 1, r2] - ri[r2])
            if obs_len[d] == l:
                val += pr0[r1]
            contrib[d, l - 1] = val
    return m0


@njit(cache=True)
def vlpl2_sample(
    perm, pair_doc, pair_len, expm, rho, theta, K, L,
    placed, scan_docs, scan_lens, scan_starts, scan_counts,
    pr, sl, ri, dr, pnum, rank0, obs_len, rkl, contrib,
):
    """Per-(d, l) gradient contribution of one sample, estimator 2.

    On top of the estimator-1 machinery, the suffix reward observed after
    a placed document d is shared across all lengths l of d: the sample is
    re-truncated at the 2L-1 budgets K-delta, the suffix rewards of those
    rankings are accumulated with slot shifts, and each length receives
    the suffix matching its shift, weighted by the probability that d
    would have entered at that length given its placement position.
    """
    nd = expm.shape[0]
    W = 2 * L - 1
    maxlen = K + L - 1

    for a in range(W):
        delta = a - (L - 1)
        budget = K - delta
        placed[:] = False
        used = 0
        cnt = 0
        for k in range(perm.shape[0]):
            j = perm[k]
            d = pair_doc[j]
            l = pair_len[j]
            if placed[d]:
                continue
            if used + l <= budget:
                placed[d] = True
                scan_docs[a, cnt] = d
                scan_lens[a, cnt] = l
                scan_starts[a, cnt] = used + 1
                used += l
                cnt += 1
        scan_counts[a] = cnt

    for a in range(W):
        delta = a - (L - 1)
        pr[a, maxlen] = 0.0
        for i in range(maxlen - 1, -1, -1):
            u = 0.0
            if i < scan_counts[a]:
                s = scan_starts[a, i]
                if s + delta >= 1:
                    l = scan_lens[a, i]
                    u = rho[scan_docs[a, i], l - 1] * theta[s + delta - 1, l - 1]
            pr[a, i] = pr[a, i + 1] + u

    a0 = L - 1
    m0 = scan_counts[a0]
    for l in range(L):
        s = 0.0
        for d in range(nd):
            s += expm[d, l]
        sl[l] = s
    ri[0] = 0.0
    for l in range(L):
        dr[l, 0] = 0.0
    rank0[:] = m0
    obs_len[:] = 0
    for i in range(m0):
        d0 = scan_docs[a0, i]
        l0 = scan_lens[a0, i]
        s0 = scan_starts[a0, i]
        rank0[d0] = i + 1
        obs_len[d0] = l0
        sp = 0.0
        for l in range(L):
            sp += sl[l]
        ri[i + 1] = ri[i] + pr[a0, i] / sp
        rem_here = K - s0 + 1
        rem_next = K - (s0 + l0) + 1
        for l in range(1, L + 1):
            th = theta[s0 - 1, l - 1] if l <= rem_here else 0.0
            dr[l - 1, i + 1] = dr[l - 1, i] + th / sp
            if l <= rem_next:
                sl[l - 1] -= expm[d0, l - 1]
            else:
                sl[l - 1] = 0.0
            pnum[l - 1, i] = expm[d0, l - 1] if l <= rem_here else 0.0

    for l in range(1, L + 1):
        r = 0
        for i in range(m0):
            if scan_starts[a0, i] - 1 + l <= K:
                r = i + 1
            else:
                break
        rkl[l - 1] = r

    for d in range(nd):
        r1 = rank0[d]
        for l in range(1, L + 1):
            r2 = r1 if r1 < rkl[l - 1] else rkl[l - 1]
            val = expm[d, l - 1] * (rho[d, l - 1] * dr[l - 1, r2] - ri[r2])
            if obs_len[d] > 0:
                # d was placed at rank r1 with length obs_len[d]; share the
                # suffix reward of the shifted ranking with this length.
                denom = 0.0
                for lp in range(L):
                    denom += pnum[lp, r1 - 1]
                w = pnum[l - 1, r1 - 1] / denom
                if w > 0.0:
                    a = (l - obs_len[d]) + (L - 1)
                    val += w * pr[a, r1]
            contrib[d, l - 1] = val
    return m0


@njit(cache=True)
def vlpl1_chunk(perms, pair_doc, pair_len, expm, rho, theta, K, L, grad_sum, grad_sumsq):
    n = perms.shape[0]
    nd = expm.shape[0]
    placed = np.zeros(nd, np.bool_)
    docs0 = np.zeros(K, np.int64)
    lens0 = np.zeros(K, np.int64)
    starts0 = np.zeros(K, np.int64)
    pr0 = np.zeros(K + 1, np.float64)
    sl = np.zeros(L, np.float64)
    ri = np.zeros(K + 1, np.float64)
    dr = np.zeros((L, K + 1), np.float64)
    rank0 = np.zeros(nd, np.int64)
    obs_len = np.zeros(nd, np.int64)
    rkl = np.zeros(L, np.int64)
    contrib = np.zeros((nd, L), np.float64)
    for t in range(n):
        vlpl1_sample(
            perms[t], pair_doc, pair_len, expm, rho, theta, K, L,
            placed, docs0, lens0, starts0, pr0, sl, ri, dr, rank0, obs_len, rkl, contrib,
        )
        for d in range(nd):
            for l in range(L):
                v = contrib[d, l]
                grad_sum[d, l] += v
                grad_sumsq[d, l] += v * v
    return n


@njit(cache=True)
def vlpl2_chunk(perms, pair_doc, pair_len, expm, rho, theta, K, L, grad_sum, grad_sumsq):
    n = perms.shape[0]
    nd = expm.shape[0]
    W = 2 * L - 1
    maxlen = K + L - 1
    placed = np.zeros(nd, np.bool_)
    scan_docs = np.zeros((W, maxlen), np.int64)
    scan_lens = np.zeros((W, maxlen), np.int64)
    scan_starts = np.zeros((W, maxlen), np.int64)
    scan_counts = np.zeros(W, np.int64)
    pr = np.zeros((W, maxlen + 1), np.float64)
    sl = np.zeros(L, np.float64)
    ri = np.zeros(K + 1, np.float64)
    dr = np.zeros((L, K + 1), np.float64)
    pnum = np.zeros((L, K), np.float64)
    rank0 = np.zeros(nd, np.int64)
    obs_len = np.zeros(nd, np.int64)
    rkl = np.zeros(L, np.int64)
    contrib = np.zeros((nd, L), np.float64)
    for t in range(n):
        vlpl2_sample(
            perms[t], pair_doc, pair_len, expm, rho, theta, K, L,
            placed, scan_docs, scan_lens, scan_starts, scan_counts,
            pr, sl, ri, dr, pnum, rank0, obs_len, rkl, contrib,
        )
        for d in range(nd):
            for l in range(L):
                v = contrib[d, l]
                grad_sum[d, l] += v
                grad_sumsq[d, l] += v * v
    return n
