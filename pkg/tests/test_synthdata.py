import numpy as np
import pytest

from varlenrank.synthdata import (
    QueryInstance,
    generate_attractiveness,
    make_bins,
    make_sample_corpus,
    parse_letor,
    read_attract_file,
    write_attract_file,
)
from varlenrank.seeding import rng_for


class TestParseLetor:
    def test_sparse_features_padded(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("2 qid:10 1:0.5 3:1.0\n")
        queries, report = parse_letor(path)
        assert len(queries) == 1
        assert queries[0].qid == "10"
        assert queries[0].labels.tolist() == [2]
        np.testing.assert_allclose(queries[0].features, [[0.5, 0.0, 1.0]])
        assert report["feature_dim"] == 3

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("")
        queries, report = parse_letor(path)
        assert queries == []
        assert report["num_queries"] == 0

    def test_comments_ignored(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("# whole line\n1 qid:1 1:1.0 # trailing\n")
        queries, _ = parse_letor(path)
        assert queries[0].labels.tolist() == [1]

    def test_oversized_query_filtered_and_reported(self, tmp_path):
        path = tmp_path / "d.txt"
        lines = [f"0 qid:big 1:{i}.0" for i in range(300)]
        lines += ["1 qid:small 1:1.0"]
        path.write_text("\n".join(lines) + "\n")
        queries, report = parse_letor(path, max_docs=250)
        assert [q.qid for q in queries] == ["small"]
        assert report["skipped_queries"] == 1
        assert report["skipped_qids"] == ["big"]

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("1 qid:1 1:1.0\nnot a line\n")
        with pytest.raises(ValueError, match=":2"):
            parse_letor(path)

    def test_bad_feature_token(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("1 qid:1 1:abc\n")
        with pytest.raises(ValueError, match=":1"):
            parse_letor(path)

    def test_label_out_of_grade_range(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("7 qid:1 1:1.0\n")
        with pytest.raises(ValueError, match="outside 0..4"):
            parse_letor(path)

    def test_groups_follow_file_order(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("0 qid:7 1:1.0\n1 qid:3 1:2.0\n2 qid:7 1:3.0\n")
        queries, _ = parse_letor(path)
        assert [q.qid for q in queries] == ["7", "3"]
        assert queries[0].labels.tolist() == [0, 2]


class TestBins:
    def test_equal_lowest_bin(self):
        scheme = make_bins("equal", 3)
        lo, hi = scheme.interval(0, 1)
        assert (lo, hi) == pytest.approx((0.0, 1 / 15))

    def test_equal_highest_bin(self):
        scheme = make_bins("equal", 3)
        lo, hi = scheme.interval(4, 3)
        assert (lo, hi) == pytest.approx((14 / 15, 1.0))

    def test_doubling_l1_widths(self):
        scheme = make_bins("doubling", 1)
        widths = np.diff(scheme.boundaries)
        np.testing.assert_allclose(widths, np.array([1, 2, 4, 8, 16]) / 31)
        # widest bin sits at the highest label
        assert widths[-1] == max(widths)

    def test_widths_partition_unit_interval(self):
        for kind in ("equal", "doubling"):
            for L in (1, 2, 3):
                scheme = make_bins(kind, L)
                widths = np.diff(scheme.boundaries)
                assert widths.sum() == pytest.approx(1.0, abs=1e-12)
                assert np.all(widths > 0)
                assert scheme.boundaries[0] == 0.0
                assert scheme.boundaries[-1] == 1.0

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            make_bins("triangular", 2)


def _toy_corpus(n_queries=6, docs_per_query=12, dim=5, seed=3):
    rng = rng_for(seed)
    queries = []
    for qid in range(n_queries):
        feats = rng.normal(size=(docs_per_query, dim))
        labels = rng.integers(0, 5, size=docs_per_query)
        queries.append(QueryInstance(qid=str(qid), features=feats, labels=labels))
    return queries


class TestGeneration:
    def test_all_values_in_unit_interval(self):
        queries = generate_attractiveness(_toy_corpus(), 3, make_bins("equal", 3), seed=1)
        for q in queries:
            assert np.all(q.attract.values >= 0.0)
            assert np.all(q.attract.values <= 1.0)

    def test_non_reordered_strictly_increasing_in_length(self):
        queries = generate_attractiveness(_toy_corpus(), 3, make_bins("equal", 3), seed=1)
        for q in queries:
            keep = ~q.reordered
            vals = q.attract.values[keep]
            assert np.all(np.diff(vals, axis=1) > 0)

    def test_exactly_half_reordered(self):
        queries = generate_attractiveness(_toy_corpus(), 2, make_bins("equal", 2), seed=2)
        flagged = sum(int(q.reordered.sum()) for q in queries)
        total = sum(q.num_docs for q in queries)
        assert flagged == total // 2

    def test_grade_separation_before_reordering(self):
        # Highest-grade documents (any length) sit above grade-3 ones.
        queries = generate_attractiveness(_toy_corpus(seed=9), 3, make_bins("equal", 3), seed=4)
        top_first, lower_last = [], []
        for q in queries:
            keep = ~q.reordered
            top = (q.labels == 4) & keep
            low = (q.labels == 3) & keep
            top_first.extend(q.attract.values[top, 0].tolist())
            lower_last.extend(q.attract.values[low, 2].tolist())
        assert top_first and lower_last
        assert min(top_first) > max(lower_last)

    def test_singleton_bin_gets_midpoint(self):
        q = QueryInstance(
            qid="1", features=np.ones((1, 2)), labels=np.array([4]),
        )
        out = generate_attractiveness([q], 1, make_bins("equal", 1), seed=5)
        lo, hi = make_bins("equal", 1).interval(4, 1)
        assert out[0].attract.values[0, 0] == pytest.approx((lo + hi) / 2)

    def test_bit_identical_across_runs(self):
        a = generate_attractiveness(_toy_corpus(), 3, make_bins("doubling", 3), seed=6)
        b = generate_attractiveness(_toy_corpus(), 3, make_bins("doubling", 3), seed=6)
        for qa, qb in zip(a, b):
            np.testing.assert_array_equal(qa.attract.values, qb.attract.values)
            np.testing.assert_array_equal(qa.reordered, qb.reordered)

    def test_different_seed_differs(self):
        a = generate_attractiveness(_toy_corpus(), 2, make_bins("equal", 2), seed=6)
        b = generate_attractiveness(_toy_corpus(), 2, make_bins("equal", 2), seed=7)
        assert any(
            not np.array_equal(qa.attract.values, qb.attract.values)
            for qa, qb in zip(a, b)
        )

    def test_scheme_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="max_len"):
            generate_attractiveness(_toy_corpus(), 3, make_bins("equal", 2), seed=1)


class TestRoundTrip:
    def test_write_read(self, tmp_path):
        queries = generate_attractiveness(_toy_corpus(), 2, make_bins("equal", 2), seed=8)
        path = tmp_path / "rho.txt"
        write_attract_file(queries, path, {"seed": 8, "scheme": "equal", "max_len": 2})
        loaded, meta = read_attract_file(path)
        assert meta["scheme"] == "equal"
        for q in queries:
            entry = loaded[q.qid]
            np.testing.assert_array_equal(entry["attract"].values, q.attract.values)
            np.testing.assert_array_equal(entry["labels"], q.labels)
            np.testing.assert_array_equal(entry["reordered"], q.reordered)


def test_sample_corpus_is_deterministic(tmp_path):
    p1 = tmp_path / "a.letor"
    p2 = tmp_path / "b.letor"
    make_sample_corpus(p1, n_queries=5, seed=7)
    make_sample_corpus(p2, n_queries=5, seed=7)
    assert p1.read_bytes() == p2.read_bytes()
    queries, report = parse_letor(p1)
    assert report["num_queries"] == 5
    assert all(q.num_docs >= 14 for q in queries)
