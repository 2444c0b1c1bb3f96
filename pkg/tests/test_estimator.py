import numpy as np
import pytest

from swbindex.corpus import EMPTY_SIGNATURE
from swbindex.estimator import (
    CATEGORIES,
    ConditionalBuilder,
    ConditionalMatrix,
    EstimatorError,
    InsufficientTrainingError,
    augment_training,
    bootstrap_se,
    build_conditional,
    classify_and_count,
    estimate_distribution,
    select_ridge_weight,
    solve_simplex_least_squares,
)
from synthgen import MixtureWorld, draw_mixture

DISJOINT = ["s_pos", "s_neu", "s_neg", "s_off"]


def identity_matrix(train_counts=None):
    return ConditionalMatrix.from_probabilities(DISJOINT, np.eye(4), train_counts)


def balanced_training(per_category=5):
    return [(sig, cat) for sig, cat in zip(DISJOINT, CATEGORIES) for _ in range(per_category)]


class TestBuildConditional:
    def test_unsmoothed_frequencies(self):
        examples = [("s1", "positive"), ("s1", "positive"), ("s2", "positive")] + [
            (s, c) for s, c in zip(("a", "b", "c"), ("neutral", "negative", "offtopic"))
        ]
        Q = build_conditional(examples, alpha=0.0, rare_threshold=0)
        col = Q.matrix[:, 0]
        assert col[Q.row_index["s1"]] == pytest.approx(2 / 3)
        assert col[Q.row_index["s2"]] == pytest.approx(1 / 3)

    def test_smoothing_formula_small_row_set(self):
        # (count + alpha) / (n_c + alpha * n_rows) with exactly two rows
        counts = {"positive": {"s1": 2, "s2": 1}, "neutral": {"s1": 1}, "negative": {"s2": 1}, "offtopic": {"s1": 1}}
        Q = ConditionalMatrix.from_counts(counts, alpha=0.5, rows=["s1", "s2"])
        np.testing.assert_allclose(Q.matrix[:, 0], [2.5 / 4, 1.5 / 4])

    def test_smoothing_formula_with_empty_row(self):
        examples = [("s1", "positive"), ("s1", "positive"), ("s2", "positive")] + [
            ("s1", "neutral"), ("s2", "negative"), ("s1", "offtopic")
        ]
        Q = build_conditional(examples, alpha=0.5, rare_threshold=0)
        # rows: s1, s2, EMPTY -> denominator 3 + 0.5 * 3
        assert Q.rows == ["s1", "s2", EMPTY_SIGNATURE]
        np.testing.assert_allclose(Q.matrix[:, 0], [2.5 / 4.5, 1.5 / 4.5, 0.5 / 4.5])

    def test_missing_category_error_names_it(self):
        examples = [("s1", "positive"), ("s2", "neutral"), ("s3", "negative")]
        with pytest.raises(InsufficientTrainingError, match="offtopic"):
            build_conditional(examples)

    def test_columns_sum_to_one(self):
        training, _, _ = draw_mixture(3, n_train=50, n_test=10)
        Q = build_conditional(training)
        np.testing.assert_allclose(Q.matrix.sum(axis=0), 1.0, atol=1e-9)
        assert np.all(Q.matrix >= 0)

    def test_rare_signatures_collapse(self):
        examples = balanced_training(5) + [("lonely", "positive")]
        Q = build_conditional(examples, rare_threshold=1)
        assert "RARE" in Q.rows
        assert "lonely" not in Q.rows
        assert Q.rows[Q.row_of("lonely")] == "RARE"

    def test_unseen_signature_maps_to_empty(self):
        Q = build_conditional(balanced_training())
        assert Q.rows[Q.row_of("never-seen")] == EMPTY_SIGNATURE


class TestEstimateDistribution:
    def test_identity_inversion(self):
        Q = identity_matrix()
        test = ["s_pos"] * 10 + ["s_neu"] * 20 + ["s_neg"] * 30 + ["s_off"] * 40
        pi = estimate_distribution(Q, test).proportions
        np.testing.assert_allclose(pi, [0.1, 0.2, 0.3, 0.4], atol=1e-9)

    def test_two_by_two_exact_solve(self):
        x = solve_simplex_least_squares(np.array([[0.6, 0.2], [0.4, 0.8]]), np.array([0.4, 0.6]))
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-9)

    def test_offtopic_concentration_disjoint_supports(self):
        training, test, _ = draw_mixture(7, overlap=0.0, pi=[0.0, 0.0, 0.0, 1.0])
        pi = estimate_distribution(build_conditional(training), test).proportions
        assert pi[CATEGORIES.index("offtopic")] >= 0.95

    def test_synthetic_mixture_recovery(self):
        training, test, pi_true = draw_mixture(11, pi=[0.2, 0.5, 0.1, 0.2])
        ridge, _ = select_ridge_weight(training, seed=11)
        pi = estimate_distribution(build_conditional(training), test, ridge).proportions
        assert float(np.abs(pi - pi_true).sum()) <= 0.05

    def test_empty_test_error(self):
        with pytest.raises(EstimatorError):
            estimate_distribution(identity_matrix(), [])

    def test_unusable_matrix_error(self):
        builder = ConditionalBuilder().add([("s1", "positive")])
        Q = builder.build()
        assert not Q.usable
        with pytest.raises(EstimatorError, match="neutral"):
            estimate_distribution(Q, ["s1"])

    def test_negative_ridge_rejected(self):
        with pytest.raises(EstimatorError):
            estimate_distribution(identity_matrix(), ["s_pos"], ridge=-1.0)


class TestSolverProperties:
    def test_simplex_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            A = rng.random((rng.integers(4, 12), 4))
            A /= A.sum(axis=0)
            b = rng.random(A.shape[0])
            b /= b.sum()
            for ridge in (0.0, 1e-4, 1e-2, 1.0):
                x = solve_simplex_least_squares(A, b, ridge)
                assert np.all(x >= 0)
                assert abs(x.sum() - 1.0) <= 1e-9

    def test_permutation_and_duplication_invariance(self):
        training, test, _ = draw_mixture(2, n_train=100, n_test=500)
        Q = build_conditional(training)
        base = estimate_distribution(Q, test).proportions
        rng = np.random.default_rng(1)
        shuffled = list(test)
        rng.shuffle(shuffled)
        np.testing.assert_allclose(estimate_distribution(Q, shuffled).proportions, base, atol=1e-12)
        np.testing.assert_allclose(estimate_distribution(Q, test + test).proportions, base, atol=1e-12)

    def test_exact_recovery_in_column_space(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            A = rng.random((10, 4)) + 0.05
            A /= A.sum(axis=0)
            pi_true = rng.dirichlet(np.ones(4))
            b = A @ pi_true
            x = solve_simplex_least_squares(A, b, 0.0)
            np.testing.assert_allclose(x, pi_true, atol=1e-6)

    def test_consistency_error_shrinks_with_test_size(self):
        means = []
        for n_test in (1_000, 10_000, 100_000):
            errors = []
            for seed in range(8):
                training, test, pi_true = draw_mixture(100 + seed, n_train=3000, n_test=n_test)
                pi = estimate_distribution(build_conditional(training), test).proportions
                errors.append(float(np.abs(pi - pi_true).sum()))
            means.append(float(np.mean(errors)))
        assert means[0] > means[1] > means[2]

    def test_aggregation_beats_classify_and_count(self):
        wins = 0
        for seed in range(100):
            training, test, pi_true = draw_mixture(seed, n_train=200, n_test=2000)
            Q = build_conditional(training)
            agg = float(np.abs(estimate_distribution(Q, test).proportions - pi_true).sum())
            cc = float(np.abs(classify_and_count(Q, test).proportions - pi_true).sum())
            wins += agg <= cc
        assert wins >= 80


class TestBootstrap:
    def test_degenerate_certainty_gives_zero_se(self):
        builder = ConditionalBuilder().add(balanced_training(5))
        dist = bootstrap_se(builder, ["s_pos"] * 20, 0.0, 50, seed=3)
        np.testing.assert_allclose(dist.standard_errors, 0.0, atol=1e-12)

    def test_seeded_determinism(self):
        training, test, _ = draw_mixture(5, n_train=100, n_test=400)
        builder = ConditionalBuilder().add(training)
        a = bootstrap_se(builder, test, 0.0, 30, seed=11)
        b = bootstrap_se(builder, test, 0.0, 30, seed=11)
        np.testing.assert_array_equal(a.standard_errors, b.standard_errors)
        np.testing.assert_array_equal(a.proportions, b.proportions)

    def test_point_estimate_is_unresampled_fit(self):
        training, test, _ = draw_mixture(6, n_train=100, n_test=400)
        builder = ConditionalBuilder().add(training)
        boot = bootstrap_se(builder, test, 0.0, 20, seed=2)
        plain = estimate_distribution(builder.build(), test, 0.0)
        np.testing.assert_array_equal(boot.proportions, plain.proportions)

    def test_se_within_factor_two_of_monte_carlo(self):
        world = MixtureWorld(42, pi=[0.2, 0.5, 0.1, 0.2])
        rng = np.random.default_rng(1)
        training = world.sample_training(200, rng)
        test = world.sample_test(2000, rng)
        boot = bootstrap_se(ConditionalBuilder().add(training), test, 0.0, 200, seed=5)
        fresh = []
        for rep in range(200):
            r = np.random.default_rng(10_000 + rep)
            Q = build_conditional(world.sample_training(200, r))
            fresh.append(estimate_distribution(Q, world.sample_test(2000, r)).proportions)
        mc_sd = np.std(np.vstack(fresh), axis=0, ddof=1)
        ratio = boot.standard_errors / mc_sd
        assert np.all(ratio >= 0.5) and np.all(ratio <= 2.0)

    def test_too_few_replicates(self):
        builder = ConditionalBuilder().add(balanced_training())
        with pytest.raises(EstimatorError):
            bootstrap_se(builder, ["s_pos"], 0.0, 1, seed=0)


class TestAugmentTraining:
    def test_adding_nothing_is_identity(self):
        builder = ConditionalBuilder().add(balanced_training())
        before = builder.build().matrix.copy()
        augment_training(builder, [])
        np.testing.assert_array_equal(builder.build().matrix, before)

    def test_incremental_equals_scratch(self):
        training, _, _ = draw_mixture(8, n_train=200, n_test=10)
        rng = np.random.default_rng(0)
        order = rng.permutation(len(training))
        split = len(training) // 3
        builder = ConditionalBuilder().add(training[i] for i in order[:split])
        augment_training(builder, (training[i] for i in order[split:]))
        scratch = ConditionalBuilder().add(training)
        incremental = builder.build()
        full = scratch.build()
        assert incremental.rows == full.rows
        np.testing.assert_allclose(incremental.matrix, full.matrix, atol=1e-15)

    def test_new_category_clears_unusable_flag(self):
        builder = ConditionalBuilder().add([("s1", "positive"), ("s2", "neutral"), ("s3", "negative")])
        assert "offtopic" in builder.build().unusable_categories
        augment_training(builder, [("s4", "offtopic")])
        assert builder.build().usable


class TestRidgeSelection:
    def test_grid_reported_and_member(self):
        training, _, _ = draw_mixture(1, n_train=200, n_test=10)
        ridge, grid = select_ridge_weight(training, seed=1)
        assert grid == [0.0, 1e-4, 1e-3, 1e-2]
        assert ridge in grid

    def test_deterministic_under_seed(self):
        training, _, _ = draw_mixture(2, n_train=200, n_test=10)
        assert select_ridge_weight(training, seed=9) == select_ridge_weight(training, seed=9)
