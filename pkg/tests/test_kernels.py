"""The compiled and pure-Python kernel paths must produce identical bits."""
import numpy as np
import pytest

from varlenrank import _kernels
from varlenrank.distribution import pair_arrays, sample_perm_chunks, stable_exp_scores
from varlenrank.seeding import rng_for
from varlenrank.verify import random_instance


def _instance(seed, max_docs=4, max_len=3, max_slots=5):
    rng = rng_for(seed)
    return random_instance(rng, max_docs=max_docs, max_len=max_len, max_slots=max_slots)


def _perms(scores, config, n, seed):
    ((_, perms),) = list(sample_perm_chunks(scores, config, n, seed, chunk=n))
    return perms


def test_backend_name_reports_selection():
    assert _kernels.backend_name() in ("numba", "numpy")
    assert _kernels.NUMBA_ENABLED == (_kernels.backend_name() == "numba")


def test_python_impl_unwraps():
    py = _kernels.python_impl(_kernels.scan_budget)
    assert callable(py)
    if _kernels.NUMBA_ENABLED:
        assert py is not _kernels.scan_budget


@pytest.mark.parametrize("which", ["vlpl1", "vlpl2"])
def test_gradient_chunks_bit_identical_across_backends(which):
    config, scores, attract, exposure = _instance(805)
    docs, lens = pair_arrays(config)
    expm = stable_exp_scores(scores)
    perms = _perms(scores, config, 400, seed=3)
    fn = getattr(_kernels, f"{which}_chunk")
    outs = []
    for impl in (fn, _kernels.python_impl(fn)):
        gs = np.zeros((config.num_docs, config.max_len))
        gss = np.zeros_like(gs)
        impl(perms, docs, lens, expm, attract.values, exposure.grid,
             config.slots, config.max_len, gs, gss)
        outs.append((gs, gss))
    np.testing.assert_array_equal(outs[0][0], outs[1][0])
    np.testing.assert_array_equal(outs[0][1], outs[1][1])


def test_reward_chunk_bit_identical_across_backends():
    config, scores, attract, exposure = _instance(806)
    docs, lens = pair_arrays(config)
    perms = _perms(scores, config, 500, seed=4)
    out_a = np.zeros(500)
    out_b = np.zeros(500)
    _kernels.reward_chunk(perms, docs, lens, attract.values, exposure.grid,
                          config.slots, config.num_docs, out_a)
    _kernels.python_impl(_kernels.reward_chunk)(
        perms, docs, lens, attract.values, exposure.grid,
        config.slots, config.num_docs, out_b)
    np.testing.assert_array_equal(out_a, out_b)


def test_scan_chunk_matches_scan_budget():
    config, scores, _, _ = _instance(807)
    docs, lens = pair_arrays(config)
    perms = _perms(scores, config, 100, seed=5)
    n, K = perms.shape[0], config.slots
    out_docs = np.zeros((n, K), np.int64)
    out_lens = np.zeros((n, K), np.int64)
    out_counts = np.zeros(n, np.int64)
    _kernels.scan_chunk(perms, docs, lens, config.num_docs, K, out_docs, out_lens, out_counts)
    placed = np.zeros(config.num_docs, np.bool_)
    idx = np.zeros(K, np.int64)
    for t in range(n):
        cnt = _kernels.scan_budget(perms[t], docs, lens, config.num_docs, K, placed, idx)
        assert cnt == out_counts[t]
        np.testing.assert_array_equal(docs[idx[:cnt]], out_docs[t, :cnt])
        np.testing.assert_array_equal(lens[idx[:cnt]], out_lens[t, :cnt])
