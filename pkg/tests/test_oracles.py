"""Leaf evaluators: synthetic oracles, k-NN AUC machinery, rollouts."""

import math

import numpy as np
import pytest

from dagbandit.feature_space import STOP, FeatureLattice
from dagbandit.oracles import (
    Dataset,
    bernoulli_sample,
    intermediate_rollout,
    key_features,
    knn_auc,
    knn_scores,
    load_csv,
    load_madelon,
    make_fs_oracles,
    make_sigmoid_bernoulli_oracles,
    neighbor_sets_brute,
    neighbor_sets_kdtree,
    save_csv,
    sigmoid_mean,
)


def brute_force_auc(scores, labels):
    """Independent oracle: exhaustive strict pair count."""
    num = 0
    den = 0
    m = len(scores)
    for i in range(m):
        for j in range(m):
            if labels[i] < labels[j]:
                den += 1
                if scores[i] < scores[j]:
                    num += 1
    return num / den


def brute_force_scores(X, y, features, queries, k):
    """Independent oracle: full sort per query with (distance, index) order."""
    out = []
    for i in queries:
        d = ((X[:, features] - X[i, features]) ** 2).sum(axis=1)
        order = sorted((d[j], j) for j in range(len(d)) if j != i)
        out.append(sum(y[j] for _, j in order[:k]))
    return np.array(out)


def random_dataset(rng, n, d):
    X = rng.random((n, d))
    y = rng.integers(0, 2, size=n)
    while y.min() == y.max():
        y = rng.integers(0, 2, size=n)
    return Dataset(X=X, y=y, feature_names=[f"v{i}" for i in range(d)])


class TestSigmoidMean:
    def test_empty_set_is_half(self, bench_scores):
        assert sigmoid_mean(bench_scores, ()) == 0.5

    def test_best_leaf_value(self, bench_scores):
        v = sigmoid_mean(bench_scores, (3, 4, 5))
        assert v == pytest.approx(1 / (1 + math.exp(-1.2)), abs=1e-15)
        assert round(v, 2) == 0.77

    def test_second_best_leaf_value(self, bench_scores):
        v = sigmoid_mean(bench_scores, (2, 4, 5))
        assert v == pytest.approx(1 / (1 + math.exp(-0.93)), abs=1e-15)
        assert round(v, 2) == 0.72

    def test_order_independent(self, bench_scores):
        assert sigmoid_mean(bench_scores, (5, 0, 3)) == sigmoid_mean(
            bench_scores, (0, 3, 5)
        )

    def test_key_shapes(self, bench_scores):
        assert key_features(((1, 2), False)) == (1, 2)
        assert key_features((1, 2)) == (1, 2)
        assert sigmoid_mean(bench_scores, ((3, 4, 5), True)) == sigmoid_mean(
            bench_scores, (3, 4, 5)
        )


class TestBernoulli:
    def test_extremes(self, rng):
        assert all(bernoulli_sample(0.0, rng) == 0.0 for _ in range(50))
        assert all(bernoulli_sample(1.0, rng) == 1.0 for _ in range(50))

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(123)
        draws = [bernoulli_sample(0.5, rng) for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(0.5, abs=0.01)

    def test_rejects_bad_mean(self, rng):
        with pytest.raises(ValueError):
            bernoulli_sample(1.2, rng)


class TestKnnAuc:
    def test_perfect_separation(self):
        # clusters far apart: every positive's neighbourhood is all-positive,
        # so all positives have strictly larger scores
        X = np.concatenate([np.linspace(0, 0.1, 10), np.linspace(10, 10.1, 10)])
        y = (np.arange(20) >= 10).astype(int)
        data = Dataset(X=X.reshape(-1, 1), y=y, feature_names=["v0"])
        assert knn_auc((0,), 20, data, 3) == 1.0

    def test_uninformative_feature_near_chance(self):
        """With labels independent of the features, the tie-aware pair count
        sits at 1/2; the strict form (ties non-concordant) sits below it by
        half the tie mass."""
        strict_vals = []
        tie_aware = []
        for seed in range(30):
            r = np.random.default_rng(seed)
            data = random_dataset(r, 60, 2)
            strict_vals.append(knn_auc((0, 1), 60, data, 5))
            scores = knn_scores(data, (0, 1), np.arange(60), 5, index="brute")
            num = den = 0.0
            for i in range(60):
                for j in range(60):
                    if data.y[i] < data.y[j]:
                        den += 1
                        if scores[i] < scores[j]:
                            num += 1
                        elif scores[i] == scores[j]:
                            num += 0.5
            tie_aware.append(num / den)
        assert abs(np.mean(tie_aware) - 0.5) < 0.05
        assert np.mean(strict_vals) < np.mean(tie_aware)
        assert abs(np.mean(strict_vals) - 0.5) < 0.2

    def test_four_point_hand_computation(self):
        """k=1 on a line; distance tie at the middle point resolves to the
        lower example index, making every score wrong-way."""
        X = np.array([[0.0], [0.1], [0.2], [1.0]])
        y = np.array([0, 1, 0, 1])
        data = Dataset(X=X, y=y, feature_names=["v0"])
        scores = knn_scores(data, (0,), np.arange(4), 1, index="brute")
        assert scores.tolist() == [1, 0, 1, 0]
        got = knn_auc((0,), 4, data, 1)
        assert got == 0.0
        assert got == brute_force_auc(scores, y)

    def test_matches_brute_force_pair_count(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(8, 31))
            d = int(rng.integers(1, 5))
            k = int(rng.integers(1, min(6, n - 1)))
            data = random_dataset(rng, n, d)
            feats = tuple(rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False))
            scores = knn_scores(data, feats, np.arange(n), k, index="brute")
            assert knn_auc(feats, n, data, k) == pytest.approx(
                brute_force_auc(scores, data.y), abs=1e-12
            )

    def test_scores_match_independent_sort(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            data = random_dataset(rng, 40, 3)
            got = knn_scores(data, (0, 2), np.arange(40), 4, index="brute")
            want = brute_force_scores(data.X, data.y, [0, 2], range(40), 4)
            assert (got == want).all()

    def test_invariant_under_global_positive_rescaling(self):
        rng = np.random.default_rng(9)
        data = random_dataset(rng, 50, 4)
        base = knn_auc((0, 1, 3), 50, data, 5)
        scaled = Dataset(
            X=data.X * 3.7, y=data.y, feature_names=data.feature_names
        )
        assert knn_auc((0, 1, 3), 50, scaled, 5) == base

    def test_subsample_redraws_until_both_classes(self):
        rng = np.random.default_rng(2)
        X = rng.random((40, 2))
        y = np.zeros(40, dtype=int)
        y[:2] = 1  # positives are rare; small subsamples often miss them
        data = Dataset(X=X, y=y, feature_names=["a", "b"])
        for seed in range(20):
            v = knn_auc((0, 1), 5, data, 3, rng=np.random.default_rng(seed))
            assert 0.0 <= v <= 1.0

    def test_input_validation(self, rng):
        data = random_dataset(rng, 20, 2)
        with pytest.raises(ValueError):
            knn_auc((), 20, data, 3)
        with pytest.raises(ValueError):
            knn_auc((0,), 20, data, 25)  # k >= n
        with pytest.raises(ValueError):
            knn_auc((0,), 10, data, 3)  # subsampling without an rng


class TestSpatialIndex:
    def test_kdtree_matches_brute_force_neighbor_sets(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(20, 200))
            d = int(rng.integers(1, 6))
            k = int(rng.integers(1, 8))
            X = rng.random((n, d))
            feats = np.arange(d)
            queries = rng.choice(n, size=min(n, 25), replace=False)
            brute = neighbor_sets_brute(X, feats, queries, k)
            tree = neighbor_sets_kdtree(X, feats, queries, k)
            assert (brute == tree).all()

    def test_knn_scores_agree_across_index_modes(self):
        rng = np.random.default_rng(77)
        data = random_dataset(rng, 120, 4)
        qs = np.arange(0, 120, 3)
        brute = knn_scores(data, (0, 1, 2), qs, 5, index="brute")
        tree = knn_scores(data, (0, 1, 2), qs, 5, index="kdtree")
        assert (brute == tree).all()


class TestRollout:
    def test_q_zero_stops_immediately(self, rng):
        got = intermediate_rollout((0, 3), 0.0, 10, rng)
        assert got == frozenset({0, 3, STOP})

    def test_q_one_exhausts_features(self, rng):
        got = intermediate_rollout((1,), 1.0, 5, rng)
        assert got == frozenset(range(5)) | {STOP}

    def test_empty_start_never_stops_first_round(self):
        for seed in range(50):
            got = intermediate_rollout((), 0.0, 6, np.random.default_rng(seed))
            assert len(got - {STOP}) >= 1

    def test_first_round_stop_probability(self):
        rng = np.random.default_rng(31)
        trials = 20_000
        stops = sum(
            1
            for _ in range(trials)
            if intermediate_rollout((0, 1, 2), 0.9, 30, rng) == frozenset({0, 1, 2, STOP})
        )
        assert stops / trials == pytest.approx(1 - 0.9**3, abs=0.01)

    def test_always_halts(self, rng):
        for _ in range(200):
            got = intermediate_rollout((), 0.97, 8, rng)
            assert STOP in got


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(5)
    X = rng.random((60, 4))
    y = (X[:, 1] > 0.5).astype(int)
    return Dataset(X=X, y=y, feature_names=list("abcd"))


class TestFsOracles:
    def test_terminal_deterministic(self, data, rng):
        oracles = make_fs_oracles(data, m=20, k=3)
        v1, e1 = oracles.terminal(((1, 2), True), rng)
        v2, e2 = oracles.terminal(((1, 2), True), rng)
        assert v1 == v2
        assert e1 == e2 == frozenset({1, 2, STOP})
        assert oracles.deterministic_terminal

    def test_intermediate_q_zero_equals_terminal_at_full_subsample(self, data):
        oracles = make_fs_oracles(data, m=len(data.y), k=3, q=0.0)
        term, _ = oracles.terminal(((0, 1), True), np.random.default_rng(0))
        inter, evaluated = oracles.intermediate(
            ((0, 1), False), np.random.default_rng(0)
        )
        assert inter == term
        assert evaluated == frozenset({0, 1, STOP})

    def test_stop_only_leaf_scores_zero(self, data, rng):
        oracles = make_fs_oracles(data, m=20, k=3)
        value, evaluated = oracles.terminal(((), True), rng)
        assert value == 0.0
        assert evaluated == frozenset({STOP})

    def test_wrong_leaf_kind_rejected(self, data, rng):
        oracles = make_fs_oracles(data, m=20, k=3)
        with pytest.raises(ValueError):
            oracles.terminal(((0,), False), rng)
        with pytest.raises(ValueError):
            oracles.intermediate(((0,), True), rng)

    def test_informative_feature_beats_noise(self, data):
        oracles = make_fs_oracles(data, m=len(data.y), k=3)
        good, _ = oracles.terminal(((1,), True), np.random.default_rng(0))
        noise, _ = oracles.terminal(((0,), True), np.random.default_rng(0))
        assert good > noise + 0.2


class TestSyntheticOracles:
    def test_values_are_binary_with_feature_set(self, bench_scores, rng):
        oracles = make_sigmoid_bernoulli_oracles(bench_scores)
        value, evaluated = oracles.terminal((3, 4, 5), rng)
        assert value in (0.0, 1.0)
        assert evaluated == frozenset({3, 4, 5})
        assert not oracles.deterministic_terminal


class TestDatasets:
    def test_validation(self):
        with pytest.raises(ValueError):
            Dataset(X=np.ones((4, 2)), y=np.zeros(4), feature_names=["a", "b"])
        with pytest.raises(ValueError):
            Dataset(
                X=np.array([[np.nan], [1.0]]),
                y=np.array([0, 1]),
                feature_names=["a"],
            )
        with pytest.raises(ValueError):
            Dataset(
                X=np.ones((2, 1)), y=np.array([0, 2]), feature_names=["a"]
            )

    def test_csv_round_trip(self, tmp_path, rng):
        data = random_dataset(rng, 25, 3)
        path = tmp_path / "data.csv"
        save_csv(data, path)
        loaded = load_csv(path)
        assert loaded.feature_names == data.feature_names
        np.testing.assert_allclose(loaded.X, data.X, rtol=1e-9)
        assert (loaded.y == data.y).all()

    def test_csv_requires_y_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n0,1,0\n1,0,1\n")
        with pytest.raises(ValueError):
            load_csv(path)

    def test_madelon_format(self, tmp_path):
        data_path = tmp_path / "m.data"
        labels_path = tmp_path / "m.labels"
        data_path.write_text("1 2 3\n4 5 6\n7 8 9\n1 1 1\n")
        labels_path.write_text("-1\n1\n1\n-1\n")
        data = load_madelon(data_path, labels_path)
        assert data.X.shape == (4, 3)
        assert data.y.tolist() == [0, 1, 1, 0]

    def test_madelon_checksum(self, tmp_path):
        import hashlib

        data_path = tmp_path / "m.data"
        labels_path = tmp_path / "m.labels"
        data_path.write_text("1 2\n3 4\n")
        labels_path.write_text("1\n-1\n")
        h = hashlib.sha256()
        for p in (data_path, labels_path):
            h.update(p.read_bytes())
        load_madelon(data_path, labels_path, checksum=h.hexdigest())
        with pytest.raises(ValueError):
            load_madelon(data_path, labels_path, checksum="0" * 64)
