import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import full_sort_knn
from rpkit.ann import (brute_force_knn, build_forest, load_forest, query, query_batch,
                       recall_at_k, save_forest)
from rpkit.core import RngStream
from rpkit.errors import DimensionError
from synth import gaussian_clusters


def points(seed, n, d):
    return RngStream(seed, 7).gaussian(n * d).reshape(n, d)


@pytest.fixture(scope="module")
def clustered():
    return gaussian_clusters(5)


@pytest.fixture(scope="module")
def forest(clustered):
    return build_forest(clustered[0], n_trees=10, leaf_size=16, seed=1)


class TestBuild:
    def test_partition_complete(self, forest):
        n = forest.data.shape[0]
        for tree in forest.trees:
            leaves = tree.leaves()
            assert all(len(leaf) <= 16 for leaf in leaves)
            np.testing.assert_array_equal(np.sort(np.concatenate(leaves)), np.arange(n))

    def test_four_points_two_leaves(self):
        f = build_forest(points(0, 4, 3), n_trees=1, leaf_size=2)
        leaves = f.trees[0].leaves()
        assert f.trees[0].n_internal == 1
        assert sorted(len(leaf) for leaf in leaves) == [2, 2]

    def test_small_data_single_leaf(self):
        f = build_forest(points(0, 5, 3), n_trees=3, leaf_size=8)
        for tree in f.trees:
            assert tree.n_nodes == 1
            np.testing.assert_array_equal(np.sort(tree.leaves()[0]), np.arange(5))

    def test_thresholds_are_medians(self):
        data = points(3, 200, 6)
        tree = build_forest(data, n_trees=1, leaf_size=10, seed=4).trees[0]
        # root node holds every row
        proj = data @ tree.directions[tree.dir_index[0]]
        assert tree.thresholds[0] == pytest.approx(np.median(proj), rel=1e-12, abs=1e-12)

    def test_deterministic_and_thread_independent(self):
        data = points(1, 300, 8)
        a = build_forest(data, 4, 8, seed=11)
        b = build_forest(data, 4, 8, seed=11, threads=3)
        for ta, tb in zip(a.trees, b.trees):
            np.testing.assert_array_equal(ta.indices, tb.indices)
            np.testing.assert_array_equal(ta.thresholds, tb.thresholds)

    def test_seed_changes_trees(self):
        data = points(1, 300, 8)
        a = build_forest(data, 1, 8, seed=1).trees[0]
        b = build_forest(data, 1, 8, seed=2).trees[0]
        assert not np.array_equal(a.indices, b.indices)

    @pytest.mark.parametrize("kw", [{"n_trees": 0}, {"leaf_size": 0}])
    def test_rejects_bad_params(self, kw):
        with pytest.raises(ValueError):
            build_forest(points(0, 10, 2), **kw)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            build_forest(np.zeros((0, 3)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 120), st.integers(1, 5), st.integers(1, 20), st.integers(0, 1000))
    def test_partition_property(self, n, d, leaf, seed):
        f = build_forest(points(seed, n, d), n_trees=2, leaf_size=leaf, seed=seed)
        for tree in f.trees:
            leaves = tree.leaves()
            assert max(len(x) for x in leaves) <= leaf
            np.testing.assert_array_equal(np.sort(np.concatenate(leaves)), np.arange(n))


class TestQuery:
    def test_self_query(self, forest):
        for i in (0, 17, 1999):
            r = query(forest, forest.data[i], top_k=1)
            assert r.indices[0] == i and r.distances[0] == 0.0

    def test_result_invariants(self, forest, clustered):
        for q in clustered[1][:10]:
            r = query(forest, q, top_k=10, budget=60)
            assert np.all(np.diff(r.distances) >= 0)
            assert len(set(r.indices.tolist())) == 10
            assert r.candidate_count >= 10
            exact = np.linalg.norm(forest.data[r.indices] - q, axis=1)
            np.testing.assert_allclose(r.distances, exact, rtol=1e-14)

    @pytest.mark.parametrize("budget", [1, 5, 40])
    def test_big_leaf_equals_brute_force(self, budget):
        data = points(2, 40, 4)
        f = build_forest(data, 3, 40, seed=0)
        for q in points(3, 5, 4):
            a = query(f, q, 1, budget)
            b = brute_force_knn(data, q, 1)
            np.testing.assert_array_equal(a.indices, b.indices)
        assert recall_at_k(f, data, points(3, 5, 4), top_k=1, budget=budget) == 1.0

    def test_recall_monotone_in_budget(self, forest, clustered):
        data, queries = clustered
        recalls = [recall_at_k(forest, data, queries, 10, b) for b in (10, 20, 50, 100, 200, 400)]
        assert all(b >= a for a, b in zip(recalls, recalls[1:]))
        assert recalls[-1] >= 0.9

    def test_recall_bounds_minimal_budget(self, clustered):
        data, queries = clustered
        f = build_forest(data, 1, 16, seed=0)
        assert 0.0 <= recall_at_k(f, data, queries[:10], 1, 1) <= 1.0

    def test_more_trees_help(self):
        data, queries = gaussian_clusters(8, n=1000, d=16, clusters=5, spread=2.0, n_queries=20)
        one, ten = [], []
        for seed in range(20):
            one.append(recall_at_k(build_forest(data, 1, 8, seed), data, queries, 10, 40))
            ten.append(recall_at_k(build_forest(data, 10, 8, seed), data, queries, 10, 40))
        assert np.mean(ten) >= np.mean(one)

    def test_batch_matches_single(self, forest, clustered):
        qs = clustered[1][:6]
        for r, q in zip(query_batch(forest, qs, 5, 50, threads=2), qs):
            np.testing.assert_array_equal(r.indices, query(forest, q, 5, 50).indices)

    def test_validation(self, forest):
        q = forest.data[0]
        with pytest.raises(DimensionError):
            query(forest, q[:-1])
        with pytest.raises(ValueError):
            query(forest, q, top_k=0)
        with pytest.raises(ValueError):
            query(forest, q, top_k=10, budget=5)
        with pytest.raises(ValueError):
            query(forest, q, top_k=5000)


class TestBruteForce:
    def test_line(self):
        data = np.array([[0.0], [1.0], [3.0]])
        assert brute_force_knn(data, [0.0], 2).indices.tolist() == [0, 1]

    def test_all_points_sorted(self):
        data = points(0, 12, 3)
        r = brute_force_knn(data, np.zeros(3), 12)
        assert sorted(r.indices.tolist()) == list(range(12))
        assert np.all(np.diff(r.distances) >= 0)

    def test_ties_prefer_lower_index(self):
        data = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        assert brute_force_knn(data, [0.0, 0.0], 2).indices.tolist() == [0, 1]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 10 ** 6), st.data())
    def test_matches_full_sort(self, n, d, seed, draw):
        data = np.round(points(seed, n, d), 1)
        q = np.round(points(seed + 1, 1, d)[0], 1)
        k = draw.draw(st.integers(1, n))
        r = brute_force_knn(data, q, k)
        assert r.indices.tolist() == full_sort_knn(data, q, k)


class TestPersistence:
    def test_round_trip(self, tmp_path, forest, clustered):
        path = tmp_path / "f.rpkf"
        save_forest(path, forest)
        assert path.read_bytes()[:4] == b"RPKF"
        back = load_forest(path, forest.data)
        for q in clustered[1][:5]:
            np.testing.assert_array_equal(query(back, q, 10, 100).indices, query(forest, q, 10, 100).indices)

    def test_checksum_mismatch(self, tmp_path, forest):
        path = tmp_path / "f.rpkf"
        save_forest(path, forest)
        other = forest.data.copy()
        other[0, 0] += 1.0
        with pytest.raises(ValueError, match="checksum"):
            load_forest(path, other)

    def test_truncated(self, tmp_path, forest):
        path = tmp_path / "f.rpkf"
        save_forest(path, forest)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(OSError, match="truncated"):
            load_forest(path, forest.data)
