import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_permutation_agreement, plaintext_kmeans
from rpkit.core import RngStream
from rpkit.privacy import (PerturbationKey, PerturbedDataset, apply_key, attack_estimate, attack_exact,
                           estimate_cosine, estimate_distance, estimate_distances, estimate_inner,
                           estimator_error_stats, gram_expectation_check, initial_centroid_indices,
                           kmeans_perturbed, perceptron_perturbed, perturb, sample_key,
                           simulate_attack_estimate)
from synth import unit_pair


def matrix(seed, m, n):
    return RngStream(seed, 5).gaussian(m * n).reshape(m, n)


def blobs(seed, m, per, centres):
    """Columns scattered around ``centres`` (m x c); returns X and labels."""
    c = centres.shape[1]
    noise = RngStream(seed, 6).gaussian(m * per * c).reshape(m, per * c)
    labels = np.repeat(np.arange(c), per)
    return centres[:, labels] + noise, labels


class TestPerturb:
    def test_zero_data(self):
        ds, _ = perturb(np.zeros((10, 4)), 3)
        np.testing.assert_array_equal(ds.U, 0.0)

    def test_scalar_formula(self):
        key = PerturbationKey(np.array([[2.5]]), 2.0)
        ds = apply_key(np.array([[3.0]]), key)
        assert ds.U[0, 0] == 2.5 * 3.0 / 2.0

    def test_scalar_via_test_mode(self):
        ds, key = perturb(np.array([[3.0]]), 1, sigma_r=2.0, seed=4, privacy=False)
        assert ds.U[0, 0] == pytest.approx(key.R[0, 0] * 3.0 / 2.0, rel=1e-15)

    def test_privacy_mode_rejects_square_key(self):
        with pytest.raises(ValueError, match="k=5 >= m=5"):
            perturb(matrix(0, 5, 3), 5)

    def test_definition(self):
        x = matrix(1, 12, 7)
        ds, key = perturb(x, 4, sigma_r=0.5, seed=2)
        np.testing.assert_allclose(ds.U, key.R @ x / (2.0 * 0.5), rtol=1e-13)
        assert ds.k == 4 and ds.n == 7 and not ds.column_norms_normalized

    def test_normalized_flag(self):
        x = matrix(1, 12, 7)
        ds, _ = perturb(x / np.linalg.norm(x, axis=0), 4)
        assert ds.column_norms_normalized

    @pytest.mark.parametrize("kind", ["gaussian", "sign", "sparse_ternary"])
    def test_key_variance(self, kind):
        key = sample_key(200, 300, sigma_r=1.5, seed=3, kind=kind)
        assert abs(key.R.mean()) < 0.01
        assert key.R.var() == pytest.approx(2.25, rel=0.02)

    def test_sigma_r_cancels(self):
        x = matrix(2, 10, 3)
        a, _ = perturb(x, 4, sigma_r=1.0, seed=9)
        b, _ = perturb(x, 4, sigma_r=3.0, seed=9)
        np.testing.assert_allclose(a.U, b.U, rtol=1e-13)

    def test_expected_gram_entry(self):
        x = matrix(3, 20, 2)
        y = matrix(4, 20, 2)
        vals = np.empty(10_000)
        for t in range(vals.size):
            key = sample_key(8, 20, seed=11, stream_id=t)
            vals[t] = estimate_inner(apply_key(x, key), apply_key(y, key))[0, 0]
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - (x.T @ y)[0, 0]) <= 3 * se


class TestGram:
    def test_diagonal_and_offdiagonal(self):
        g = gram_expectation_check(20, 6, trials=10_000, seed=1)
        assert g.max_diag_deviation <= 0.05 * 20
        assert g.max_offdiag_deviation <= 0.05 * 20

    def test_sigma_doubling(self):
        a = gram_expectation_check(5, 4, 1.0, trials=200, seed=2)
        b = gram_expectation_check(5, 4, 2.0, trials=200, seed=2)
        np.testing.assert_allclose(b.mean_gram, 4 * a.mean_gram, rtol=1e-12)
        assert b.expected_diag == 4 * a.expected_diag

    def test_rejects_few_trials(self):
        with pytest.raises(ValueError):
            gram_expectation_check(3, 3, trials=99)


class TestEstimates:
    def test_self_product_nonnegative(self):
        ds, _ = perturb(matrix(0, 30, 6), 10)
        assert np.all(np.diag(estimate_inner(ds, ds)) >= 0)

    def test_bilinear_scaling(self):
        x = matrix(1, 30, 4)
        key = sample_key(10, 30, seed=3)
        a = estimate_inner(apply_key(x, key), apply_key(x, key))
        b = estimate_inner(apply_key(2.5 * x, key), apply_key(x, key))
        np.testing.assert_allclose(b, 2.5 * a, rtol=1e-13, atol=1e-12)

    def test_mismatched_releases(self):
        x = matrix(1, 30, 4)
        a = apply_key(x, sample_key(10, 30, seed=1))
        with pytest.raises(ValueError, match="k, sigma_r"):
            estimate_inner(a, apply_key(x, sample_key(11, 30, seed=1)))
        with pytest.raises(ValueError, match="k, sigma_r"):
            estimate_inner(a, apply_key(x, sample_key(10, 30, 2.0, seed=1)))
        with pytest.raises(ValueError, match="different keys"):
            estimate_inner(a, apply_key(x, sample_key(10, 30, seed=2)))

    @pytest.mark.parametrize("uv, dist", [(1.0, 0.0), (0.0, math.sqrt(2)), (-1.0, 2.0)])
    def test_distance_examples(self, uv, dist):
        u = np.array([1.0, 0.0])
        v = np.array([uv, math.sqrt(1 - uv * uv)])
        assert estimate_distance(u, v) == pytest.approx(dist, abs=1e-15)

    def test_overshoot_clipped(self):
        assert estimate_distance([1.2, 0.0], [1.0, 0.0]) == 0.0
        assert estimate_cosine([-3.0], [1.0]) == -1.0

    @given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
           st.lists(st.floats(-3, 3), min_size=3, max_size=3))
    def test_distance_cosine_identity(self, u, v):
        assert estimate_distance(u, v) ** 2 + 2 * estimate_cosine(u, v) == pytest.approx(2.0, abs=1e-12)

    def test_distance_matrix(self):
        x = matrix(5, 40, 5)
        ds, _ = perturb(x, 39, seed=1)
        est = estimate_distances(ds)
        assert np.all(np.diag(est) == 0) and np.allclose(est, est.T)


@pytest.fixture(scope="module")
def pair():
    return unit_pair(7, 100)


@pytest.fixture(scope="module")
def separated():
    centres = 6.0 * matrix(9, 64, 3)
    return blobs(10, 64, 40, centres)


class TestErrorStats:
    def test_unbiased_with_bounded_variance(self, pair):
        s = estimator_error_stats(*pair, k=50, trials=10_000, seed=1)
        assert abs(s.mean_error) <= 3 * s.standard_error
        assert s.variance <= s.variance_bound * 1.1
        assert s.variance_bound == 2 / 50

    def test_doubling_k_halves_variance(self, pair):
        a = estimator_error_stats(*pair, k=20, trials=4000, seed=2)
        b = estimator_error_stats(*pair, k=40, trials=4000, seed=3)
        assert 0.35 <= b.variance / a.variance <= 0.7

    def test_requires_unit_vectors(self, pair):
        with pytest.raises(ValueError, match="unit norm"):
            estimator_error_stats(2 * pair[0], pair[1], k=5, trials=10)


class TestAttackExact:
    def test_underdetermined_is_non_unique(self):
        x = matrix(1, 20, 3)
        ds, key = perturb(x, 5, seed=4)
        res = attack_exact(ds, key)
        assert res.verdict == "non-unique"
        err = np.linalg.norm(res.reconstruction - x) / np.linalg.norm(x)
        assert err > 0.1
        np.testing.assert_allclose(key.R @ res.reconstruction, key.R @ x, atol=1e-9)

    def test_square_key_recovers(self):
        x = matrix(2, 6, 4)
        ds, key = perturb(x, 6, seed=5, privacy=False)
        res = attack_exact(ds, key)
        assert res.unique
        np.testing.assert_allclose(res.reconstruction, x, atol=1e-8)

    @pytest.mark.parametrize("k, m", [(1, 2), (3, 3), (7, 4), (9, 10)])
    def test_dichotomy(self, k, m):
        ds, key = perturb(matrix(k, m, 2), k, seed=k + m, privacy=False)
        assert attack_exact(ds, key).unique == (k >= m)


class TestAttackEstimate:
    def test_zero_release(self):
        s = attack_estimate(np.zeros(5), 12, trials=50)
        np.testing.assert_array_equal(s.mean, 0.0)
        np.testing.assert_array_equal(s.variance, 0.0)

    def test_fixed_release_statistics(self):
        u = RngStream(1, 0).gaussian(10)
        s = attack_estimate(u, 30, trials=4000, seed=2)
        assert s.predicted_variance == pytest.approx(u @ u / 10)
        np.testing.assert_allclose(s.variance, s.predicted_variance, rtol=0.15)

    def test_simulated_variance(self):
        x = RngStream(2, 0).gaussian(30)
        s = simulate_attack_estimate(x, 10, trials=4000, seed=4)
        assert s.predicted_variance == pytest.approx(x @ x / 10)
        np.testing.assert_allclose(s.variance, s.predicted_variance, rtol=0.15)
        # over 30 elements a 4-SE band keeps the family-wise false alarm small
        assert np.all(np.abs(s.mean) <= 4 * s.standard_error)


class TestKMeans:
    def test_single_cluster(self, separated):
        ds, _ = perturb(separated[0], 32, seed=1)
        assert np.all(kmeans_perturbed(ds, 1).assignments == 0)

    def test_one_cluster_per_point(self):
        ds, _ = perturb(matrix(0, 10, 6), 5)
        res = kmeans_perturbed(ds, 6)
        assert sorted(res.assignments.tolist()) == list(range(6))
        assert res.cost == 0.0

    def test_too_many_clusters(self):
        ds, _ = perturb(matrix(0, 10, 6), 5)
        with pytest.raises(ValueError, match="exceeds"):
            kmeans_perturbed(ds, 7)

    def test_matches_plaintext(self, separated):
        x, _ = separated
        ds, _ = perturb(x, 32, seed=2)
        res = kmeans_perturbed(ds, 3, seed=5)
        plain = plaintext_kmeans(x.T, [initial_centroid_indices(x.shape[1], 3, 5, r) for r in range(10)])
        assert best_permutation_agreement(plain, res.assignments, 3) >= 0.95

    def test_deterministic(self, separated):
        ds, _ = perturb(separated[0], 32, seed=2)
        a = kmeans_perturbed(ds, 3, seed=8)
        b = kmeans_perturbed(ds, 3, seed=8)
        np.testing.assert_array_equal(a.assignments, b.assignments)


class TestPerceptron:
    def test_separable_clouds(self):
        centres = np.stack([np.full(64, 1.5), np.full(64, -1.5)], axis=1)
        x, labels = blobs(3, 64, 50, centres)
        ds, _ = perturb(x, 32, seed=1)
        assert perceptron_perturbed(ds, labels, epochs=50).accuracy >= 0.95

    def test_single_class(self):
        ds, _ = perturb(matrix(1, 10, 8), 4)
        res = perceptron_perturbed(ds, np.ones(8), epochs=1)
        assert res.accuracy == 1.0

    def test_zero_epochs_majority(self):
        ds, _ = perturb(matrix(1, 10, 8), 4)
        labels = np.array([0, 0, 0, 0, 0, 1, 1, 1])
        res = perceptron_perturbed(ds, labels, epochs=0)
        assert res.tie_label == -1 and res.accuracy == 5 / 8
        assert np.all(res.weights == 0)

    def test_even_split_ties_positive(self):
        ds, _ = perturb(matrix(1, 10, 4), 4)
        res = perceptron_perturbed(ds, [1, -1, 1, -1], epochs=0)
        assert res.tie_label == 1 and res.accuracy == 0.5

    def test_rejects_multiclass(self):
        ds, _ = perturb(matrix(1, 10, 3), 4)
        with pytest.raises(ValueError, match="binary"):
            perceptron_perturbed(ds, [0, 1, 2])

    def test_accepts_raw_matrix(self):
        res = perceptron_perturbed(np.array([[1.0, -1.0]]), [1, -1], epochs=5)
        assert res.accuracy == 1.0


@settings(max_examples=20)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_release_shape(k, seed):
    ds, key = perturb(matrix(seed % 100, 9, 4), k, seed=seed)
    assert ds.U.shape == (k, 4) and key.R.shape == (k, 9)
    assert isinstance(ds, PerturbedDataset)


class TestRestarts:
    def test_start_sets_ignore_data(self):
        a = initial_centroid_indices(40, 4, seed=3, restart=2)
        assert len(set(a.tolist())) == 4
        np.testing.assert_array_equal(a, initial_centroid_indices(40, 4, seed=3, restart=2))
        assert not np.array_equal(a, initial_centroid_indices(40, 4, seed=3, restart=1))

    def test_single_restart_matches_oracle(self, separated):
        x, _ = separated
        ds, _ = perturb(x, 32, seed=2)
        res = kmeans_perturbed(ds, 3, seed=5, restarts=1)
        u = ds.U.T
        plain = plaintext_kmeans(u, [initial_centroid_indices(u.shape[0], 3, 5)])
        np.testing.assert_array_equal(res.assignments, plain)

    def test_restarts_never_raise_cost(self, separated):
        ds, _ = perturb(separated[0], 32, seed=2)
        one = kmeans_perturbed(ds, 3, seed=2, restarts=1)
        many = kmeans_perturbed(ds, 3, seed=2, restarts=10)
        assert many.cost <= one.cost

    def test_rejects_zero_restarts(self, separated):
        ds, _ = perturb(separated[0], 32, seed=2)
        with pytest.raises(ValueError, match="restarts"):
            kmeans_perturbed(ds, 3, restarts=0)
