import numpy as np
import pytest

from varlenrank.core import AttractTable, RankingConfig, ScoreTable, validate_ranking
from varlenrank.exposure import build_exposure_table
from varlenrank.gradients import enumeration_gradient
from varlenrank.objective import expected_attractiveness_exact, ranking_reward
from varlenrank.optimize import (
    AdamParams,
    AdamState,
    Scorer,
    bce_loss,
    greedy_decode,
    postprocess_optimize,
    train_inprocess,
    train_relevance_head,
)
from varlenrank.seeding import rng_for
from varlenrank.synthdata import QueryInstance
from varlenrank.verify import table1_instance


class TestAdam:
    def test_maximizes_quadratic(self):
        state = AdamState.for_params([np.zeros(3)], AdamParams(lr=0.05))
        x = np.zeros(3)
        target = np.array([1.0, -2.0, 0.5])
        for _ in range(500):
            (x,) = state.ascend([x], [-(x - target)])
        np.testing.assert_allclose(x, target, atol=1e-2)

    def test_weight_decay_shrinks(self):
        state = AdamState.for_params([np.ones(2)], AdamParams(lr=0.1, weight_decay=1.0))
        x = np.ones(2)
        for _ in range(200):
            (x,) = state.ascend([x], [np.zeros(2)])
        assert np.all(np.abs(x) < 0.05)


class TestGreedyDecode:
    def test_always_valid_complete(self):
        rng = rng_for(42)
        for _ in range(50):
            D = int(rng.integers(1, 5))
            K = int(rng.integers(1, 5))
            L = int(rng.integers(1, K + 1))
            cfg = RankingConfig(D, K, L)
            decode = greedy_decode(ScoreTable(rng.normal(size=(D, L))), cfg)
            assert validate_ranking(decode, cfg).is_complete

    def test_single_doc_places_argmax_pair(self):
        cfg = RankingConfig(1, 3, 3)
        decode = greedy_decode(ScoreTable(np.array([[0.1, 0.9, 0.3]])), cfg)
        assert decode.key() == ((0, 2),)


class TestPostprocess:
    def test_worked_example_reaches_global_optimum(self):
        cfg, attract, _, theta2 = table1_instance()
        scores, decode = postprocess_optimize(
            attract, theta2, cfg, hyper=AdamParams(lr=0.05),
            estimator="vlpl2", steps=500, n_samples=1000, seed=0,
        )
        assert decode.key() == ((1, 1), (0, 2))
        assert ranking_reward(decode, attract, theta2).value == pytest.approx(1.094, abs=5e-4)

    def test_single_doc_decodes_to_best_length(self):
        cfg = RankingConfig(1, 3, 3)
        attract = AttractTable(np.array([[0.3, 0.9, 0.5]]))
        exposure = build_exposure_table("uniform", 3, 3)
        _, decode = postprocess_optimize(
            attract, exposure, cfg, steps=200, n_samples=200, seed=1,
            hyper=AdamParams(lr=0.1),
        )
        best_l = 1 + int(np.argmax([exposure.lookup(1, l) * attract.values[0, l - 1] for l in (1, 2, 3)]))
        assert decode.key() == ((0, best_l),)

    def test_exact_objective_improves(self):
        rng = rng_for(77)
        cfg = RankingConfig(3, 3, 2)
        attract = AttractTable(rng.uniform(0.1, 1.0, size=(3, 2)))
        exposure = build_exposure_table("inv_rank", 3, 2)
        before = expected_attractiveness_exact(ScoreTable.zeros(cfg), attract, exposure, cfg)
        scores, _ = postprocess_optimize(
            attract, exposure, cfg, steps=100, n_samples=500, seed=2,
            hyper=AdamParams(lr=0.05),
        )
        after = expected_attractiveness_exact(scores, attract, exposure, cfg)
        assert after > before

    def test_seeded_determinism(self):
        cfg = RankingConfig(2, 3, 2)
        attract = AttractTable(np.array([[0.9, 0.8], [0.2, 0.7]]))
        exposure = build_exposure_table("dcg", 3, 2)
        a, _ = postprocess_optimize(attract, exposure, cfg, steps=30, n_samples=100, seed=3)
        b, _ = postprocess_optimize(attract, exposure, cfg, steps=30, n_samples=100, seed=3)
        np.testing.assert_array_equal(a.values, b.values)


class TestScorer:
    def test_forward_shapes_and_determinism(self):
        scorer = Scorer(4, (16,), 3, seed=0)
        x = rng_for(1).normal(size=(7, 4))
        out1 = scorer.scores(x)
        out2 = scorer.scores(x)
        assert out1.shape == (7, 3)
        np.testing.assert_array_equal(out1, out2)

    def test_rejects_too_many_layers(self):
        with pytest.raises(ValueError):
            Scorer(4, (8,) * 6, 2)

    def test_bad_feature_shape(self):
        scorer = Scorer(4, (8,), 2)
        with pytest.raises(ValueError):
            scorer.scores(np.zeros((3, 5)))

    def test_backward_matches_finite_differences(self):
        rng = rng_for(2)
        scorer = Scorer(3, (8, 8), 2, seed=4)
        x = rng.normal(size=(5, 3))
        v = rng.normal(size=(5, 2))  # random linear functional of outputs

        def loss():
            return float((scorer.scores(x) * v).sum())

        out, cache = scorer.forward(x)
        grads = scorer.backward(cache, v)
        eps = 1e-6
        for pi in range(len(scorer.params)):
            flat = scorer.params[pi].ravel()
            for idx in range(0, flat.size, max(1, flat.size // 5)):
                orig = flat[idx]
                flat[idx] = orig + eps
                up = loss()
                flat[idx] = orig - eps
                down = loss()
                flat[idx] = orig
                fd = (up - down) / (2 * eps)
                assert grads[pi].ravel()[idx] == pytest.approx(fd, abs=1e-5)

    def test_dropout_only_when_rng_given(self):
        scorer = Scorer(3, (32,), 2, dropout=0.5, seed=5)
        x = rng_for(3).normal(size=(4, 3))
        clean1 = scorer.scores(x)
        clean2 = scorer.scores(x)
        np.testing.assert_array_equal(clean1, clean2)
        noisy, _ = scorer.forward(x, dropout_rng=rng_for(6))
        assert not np.allclose(noisy, clean1)

    def test_checkpoint_round_trip(self, tmp_path):
        scorer = Scorer(4, (16, 16), 3, dropout=0.25, seed=7)
        path = tmp_path / "scorer.json"
        scorer.save(path)
        loaded = Scorer.load(path)
        x = rng_for(8).normal(size=(6, 4))
        np.testing.assert_array_equal(scorer.scores(x), loaded.scores(x))
        assert loaded.dropout == 0.25

    def test_checkpoint_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "other"}')
        with pytest.raises(ValueError):
            Scorer.load(path)


def _one_hot_query(attract_values):
    n = attract_values.shape[0]
    return QueryInstance(
        qid="1", features=np.eye(n), labels=np.zeros(n, dtype=np.int64),
        attract=AttractTable(attract_values),
    )


class TestTrainInprocess:
    def test_zero_epochs_returns_initial_scorer(self):
        q = _one_hot_query(np.array([[0.5, 0.6], [0.2, 0.1]]))
        exposure = build_exposure_table("dcg", 3, 2)
        scorer = Scorer(2, (16,), 2, seed=9)
        before = [p.copy() for p in scorer.params]
        out = train_inprocess([q], exposure, 3, 2, epochs=0, scorer=scorer, seed=10)
        assert out is scorer
        for b, a in zip(before, out.params):
            np.testing.assert_array_equal(b, a)

    def test_feature_dim_mismatch_rejected(self):
        q1 = _one_hot_query(np.array([[0.5], [0.2]]))
        q2 = QueryInstance(
            qid="2", features=np.zeros((2, 3)), labels=np.zeros(2, dtype=np.int64),
            attract=AttractTable(np.full((2, 1), 0.5)),
        )
        exposure = build_exposure_table("dcg", 2, 1)
        with pytest.raises(ValueError, match="feature dimension"):
            train_inprocess([q1, q2], exposure, 2, 1, epochs=1, seed=0)

    def test_one_hot_linear_scorer_matches_postprocess(self):
        rng = rng_for(11)
        vals = rng.uniform(0.1, 1.0, size=(3, 2))
        q = _one_hot_query(vals)
        cfg = RankingConfig(3, 3, 2)
        exposure = build_exposure_table("inv_rank", 3, 2)
        # Linear scorer on one-hot features is one weight per (doc, length).
        scorer = train_inprocess(
            [q], exposure, 3, 2, hidden=(), epochs=400, n_samples=300,
            hyper=AdamParams(lr=0.05), seed=12,
        )
        table, decode_post = postprocess_optimize(
            q.attract, exposure, cfg, steps=400, n_samples=300,
            hyper=AdamParams(lr=0.05), seed=13,
        )
        value_in = expected_attractiveness_exact(
            ScoreTable(scorer.scores(q.features)), q.attract, exposure, cfg
        )
        value_post = expected_attractiveness_exact(table, q.attract, exposure, cfg)
        assert value_in == pytest.approx(value_post, rel=0.01)

    def test_early_stopping_halts_and_restores_best(self):
        rng = rng_for(22)
        vals = rng.uniform(0.1, 1.0, size=(3, 2))
        q = _one_hot_query(vals)
        exposure = build_exposure_table("dcg", 3, 2)
        # patience 0: stop at the first epoch whose validation value does
        # not improve; with a tiny learning rate that happens early, well
        # before the epoch budget.
        scorer = train_inprocess(
            [q], exposure, 3, 2, hidden=(), epochs=50, n_samples=50,
            hyper=AdamParams(lr=1e-6), seed=23,
            val_dataset=[q], early_stop_patience=0, val_samples=200,
        )
        full = train_inprocess(
            [q], exposure, 3, 2, hidden=(), epochs=50, n_samples=50,
            hyper=AdamParams(lr=1e-6), seed=23,
        )
        # the early-stopped parameters differ from the full 50-epoch run
        assert any(
            not np.array_equal(a, b) for a, b in zip(scorer.params, full.params)
        )

    def test_seeded_determinism_with_dropout(self):
        q = _one_hot_query(np.array([[0.5, 0.6], [0.2, 0.1], [0.9, 0.3]]))
        exposure = build_exposure_table("dcg", 3, 2)
        runs = []
        for _ in range(2):
            scorer = train_inprocess(
                [q], exposure, 3, 2, epochs=4, n_samples=100, seed=21,
                hidden=(16,), dropout=0.3,
            )
            runs.append([p.copy() for p in scorer.params])
        for a, b in zip(*runs):
            np.testing.assert_array_equal(a, b)

    def test_parameter_gradients_match_composed_finite_differences(self):
        rng = rng_for(14)
        vals = rng.uniform(0.1, 1.0, size=(2, 2))
        q = _one_hot_query(vals)
        cfg = RankingConfig(2, 2, 2)
        exposure = build_exposure_table("dcg", 2, 2)
        scorer = Scorer(2, (8,), 2, seed=15)

        def exact_obj():
            return expected_attractiveness_exact(
                ScoreTable(scorer.scores(q.features)), q.attract, exposure, cfg
            )

        out, cache = scorer.forward(q.features)
        grad_scores = enumeration_gradient(
            ScoreTable(out), q.attract, exposure, cfg
        ).grads
        grads = scorer.backward(cache, grad_scores)
        eps = 1e-6
        for pi in range(len(scorer.params)):
            flat = scorer.params[pi].ravel()
            for idx in range(0, flat.size, max(1, flat.size // 4)):
                orig = flat[idx]
                flat[idx] = orig + eps
                up = exact_obj()
                flat[idx] = orig - eps
                down = exact_obj()
                flat[idx] = orig
                fd = (up - down) / (2 * eps)
                got = grads[pi].ravel()[idx]
                assert got == pytest.approx(fd, rel=1e-3, abs=1e-7)


class TestRelevanceHead:
    def test_realizable_target_learned(self):
        rng = rng_for(16)
        w_true = rng.normal(size=(3, 2))
        queries = []
        for qid in range(6):
            x = rng.normal(size=(30, 3))
            rho = 1.0 / (1.0 + np.exp(-(x @ w_true)))
            queries.append(QueryInstance(
                qid=str(qid), features=x, labels=np.zeros(30, dtype=np.int64),
                attract=AttractTable(rho),
            ))
        head = train_relevance_head(
            queries, hyper=AdamParams(lr=0.02), epochs=400, seed=17, hidden=(),
        )
        preds = np.concatenate([head.predict_attract(q.features) for q in queries])
        labels = np.concatenate([q.attract.values for q in queries])
        assert np.max(np.abs(preds - labels)) < 0.02

    def test_constant_labels_learn_constant(self):
        rng = rng_for(18)
        q = QueryInstance(
            qid="1", features=rng.normal(size=(40, 4)),
            labels=np.zeros(40, dtype=np.int64),
            attract=AttractTable(np.full((40, 2), 0.5)),
        )
        head = train_relevance_head([q], hyper=AdamParams(lr=0.05), epochs=300, seed=19)
        preds = head.predict_attract(q.features)
        assert np.max(np.abs(preds - 0.5)) < 0.03
        # BCE floor for p = y = 0.5 is ln 2.
        assert bce_loss(head, [q]) == pytest.approx(np.log(2), abs=1e-3)

    def test_zero_epochs_untouched(self):
        q = _one_hot_query(np.array([[0.5, 0.5]]))
        scorer = Scorer(1, (8,), 2, seed=20)
        before = [p.copy() for p in scorer.params]
        out = train_relevance_head([q], epochs=0, scorer=scorer)
        for b, a in zip(before, out.params):
            np.testing.assert_array_equal(b, a)
