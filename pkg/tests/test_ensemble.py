import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bignn.core import ConfigError, Dataset, ParameterError, RngStream
from bignn.ensemble import (BigNnModel, FixedK, Sim3K, TheoryK, cv_errors, divide_oracle_k,
                            knn_predict, majority, predict, predict_batch, predict_local,
                            select_k, select_k_sim3, train, tune_k_cv, vote_matrix)
from bignn.knn_index import build_index


def gaussian_data(N, d=3, seed=0):
    gen = np.random.default_rng(seed)
    y = gen.integers(0, 2, N)
    return Dataset(gen.normal(size=(N, d)) + y[:, None], y)


class TestSelectK:
    def test_exact_power(self):
        assert select_k(0.5, 1024, 4, 1) == 16

    def test_single_subsample(self):
        # 1000**(2/7) = 7.197
        assert select_k(0.2, 1000, 1, 1) == 7

    def test_truncated_at_one(self):
        assert select_k(0.2, 4, 512, 1) == 1

    def test_k_o_scales(self):
        assert select_k(0.5, 1024, 4, 2.0) == 32

    def test_errors(self):
        for bad in [dict(alpha=0), dict(alpha=-1), dict(k_o=0)]:
            args = dict(alpha=0.2, n=10, s=1, k_o=1.0) | bad
            with pytest.raises(ParameterError):
                select_k(**args)


class TestSelectKSim3:
    def test_oracle_count(self):
        # 27000**0.7 = 1264.60 -> K = 1265
        assert select_k_sim3(27000, 1, 0.7, 1.0) == 1265

    def test_ceiling_at_unity(self):
        # N**0.5 = 10 for N = 100
        assert select_k_sim3(100, 10, 0.5, 1.0) == 1

    def test_default_constant(self):
        # K = 100 (N = 10**4, exponent 0.5); 1.351284 * 100 / 8 = 16.891
        assert select_k_sim3(10_000, 8, 0.5) == 17


@pytest.mark.parametrize("k,s,expected", [(21, 8, 3), (5, 1, 5), (3, 100, 1)])
def test_divide_oracle_k(k, s, expected):
    assert divide_oracle_k(k, s) == expected


class TestTrain:
    def test_gamma_zero_is_one_index(self):
        ds = gaussian_data(200)
        model = train(ds, 0.0, TheoryK(0.2), RngStream(1))
        assert model.s == 1 and model.local_indices[0].size == 200

    def test_theory_rule_n1000_gamma03(self):
        # s = 8, n = 125, k = round(125**(2/7) * 8**(-1/1.4)) = round(0.900) = 1
        model = train(gaussian_data(1000), 0.3, TheoryK(0.2, 1.0), RngStream(1))
        assert model.s == 8 and model.partition.n == 125
        assert model.k_local == 1

    def test_tiny_dataset_singleton_subsamples(self):
        # 8**0.9 = 6.498 -> s = 6, sizes in {1, 2}
        model = train(gaussian_data(8), 0.9, TheoryK(0.2), RngStream(1))
        assert model.s == 6 and model.k_local == 1
        assert min(ix.size for ix in model.local_indices) == 1

    def test_k_too_large_names_subsample(self):
        with pytest.raises(ConfigError, match="subsample"):
            train(gaussian_data(50), 0.5, FixedK(10), RngStream(1))

    def test_deterministic(self):
        ds = gaussian_data(500)
        a = train(ds, 0.3, FixedK(3), RngStream(4))
        b = train(ds, 0.3, FixedK(3), RngStream(4))
        Q = gaussian_data(100, seed=9).X
        np.testing.assert_array_equal(predict_batch(a, Q), predict_batch(b, Q))

    def test_threads_do_not_change_output(self):
        ds = gaussian_data(800)
        Q = gaussian_data(100, seed=2).X
        a = train(ds, 0.4, FixedK(3), RngStream(4), threads=1)
        b = train(ds, 0.4, FixedK(3), RngStream(4), threads=4)
        np.testing.assert_array_equal(predict_batch(a, Q), predict_batch(b, Q, threads=4))

    def test_sim3_rule(self):
        model = train(gaussian_data(2000), 0.2, Sim3K(0.7, 1.0), RngStream(0))
        # s = round(2000**0.2) = 5, K = round(2000**0.7) = 205, k = ceil(205/5) = 41
        assert model.s == 5 and model.k_local == 41


class TestLocalDecision:
    def _index(self, labels):
        X = np.arange(len(labels), dtype=float)[:, None]
        return build_index(X, labels)

    @pytest.mark.parametrize("labels,expected", [((1, 1, 0), 1), ((1, 0), 0), ((0, 0, 0), 0)])
    def test_strict_half(self, labels, expected):
        assert predict_local(self._index(labels), len(labels), [0.0]) == expected


def model_from_votes(votes):
    """A model whose subsample j always votes votes[j] (1-NN over a single point)."""
    from bignn.core import PartitionPlan
    s = len(votes)
    indices = [build_index(np.zeros((1, 1)), [v], ids=[j]) for j, v in enumerate(votes)]
    plan = PartitionPlan(0.5, s, 1, np.arange(s))
    return BigNnModel(indices, 1, 0.5, plan)


class TestMajorityVote:
    @pytest.mark.parametrize("votes,expected", [((1, 0, 1), 1), ((1, 0), 0), ((1,), 1), ((0,), 0)])
    def test_examples(self, votes, expected):
        assert predict(model_from_votes(votes), [0.0]) == expected

    def test_exhaustive_patterns_up_to_seven(self):
        for s in range(1, 8):
            for pattern in itertools.product((0, 1), repeat=s):
                expected = int(sum(pattern) > s / 2)
                assert predict(model_from_votes(pattern), [0.0]) == expected

    def test_single_flip_changes_output_only_across_half(self):
        for s in range(1, 8):
            for pattern in itertools.product((0, 1), repeat=s):
                base = predict(model_from_votes(pattern), [0.0])
                for j in range(s):
                    flipped = list(pattern)
                    flipped[j] ^= 1
                    out = predict(model_from_votes(flipped), [0.0])
                    crossed = (sum(pattern) > s / 2) != (sum(flipped) > s / 2)
                    assert (out != base) == crossed

    def test_permutation_equivariance(self):
        ds = gaussian_data(600)
        model = train(ds, 0.4, FixedK(3), RngStream(3))
        Q = gaussian_data(200, seed=5).X
        base = predict_batch(model, Q)
        perm = np.random.default_rng(0).permutation(model.s)
        shuffled = BigNnModel([model.local_indices[j] for j in perm], model.k_local,
                              model.gamma, model.partition)
        np.testing.assert_array_equal(predict_batch(shuffled, Q), base)

    def test_vote_count_matches_enumeration(self):
        ds = gaussian_data(700, seed=8)
        model = train(ds, 0.5, FixedK(2), RngStream(8))
        Q = gaussian_data(50, seed=6).X
        for q, got in zip(Q, predict_batch(model, Q)):
            ones = sum(predict_local(ix, model.k_local, q) for ix in model.local_indices)
            assert got == int(ones > model.s / 2)

    def test_majority_helper(self):
        np.testing.assert_array_equal(majority(np.array([[1, 0], [0, 0]])), [0, 0])


class TestOracleReduction:
    @settings(max_examples=25, deadline=None)
    @given(N=st.integers(5, 400), k=st.integers(1, 5), seed=st.integers(0, 2**31))
    def test_gamma_zero_equals_direct_knn(self, N, k, seed):
        ds = gaussian_data(N, d=2, seed=seed)
        Q = gaussian_data(60, d=2, seed=seed + 1).X
        model = train(ds, 0.0, FixedK(min(k, N)), RngStream(seed))
        direct = knn_predict(ds, Q, min(k, N), index_kind="brute")
        np.testing.assert_array_equal(predict_batch(model, Q), direct)


class TestTuneK:
    def test_separable_returns_smallest(self):
        gen = np.random.default_rng(0)
        y = np.repeat([0, 1], 60)
        X = np.where(y[:, None] == 1, 100.0, 0.0) + gen.normal(size=(120, 2))
        assert tune_k_cv(Dataset(X, y), 5, [3, 5, 1, 9], RngStream(1)) == 1

    def test_matches_exhaustive_cv(self):
        gen = np.random.default_rng(4)
        N = 150
        ds = Dataset(gen.normal(size=(N, 2)), gen.integers(0, 2, N))  # pure noise labels
        grid = list(range(1, 40, 2))
        rng = RngStream(9)
        # exhaustive: fit each fold and k separately with the brute-force oracle
        from bignn.ensemble import stratified_folds
        fold = stratified_folds(ds.y, 4, rng)
        errs = []
        for k in grid:
            per_fold = []
            for f in range(4):
                tr, va = fold != f, fold == f
                pred = knn_predict(Dataset(ds.X[tr], ds.y[tr]), ds.X[va], k, index_kind="brute")
                per_fold.append(np.mean(pred != ds.y[va]))
            errs.append(np.mean(per_fold))
        np.testing.assert_allclose(cv_errors(ds, 4, grid, rng), errs, atol=1e-12)
        best = min(errs)
        assert tune_k_cv(ds, 4, grid, rng) == min(k for k, e in zip(grid, errs) if e == best)

    def test_errors(self):
        ds = gaussian_data(50)
        with pytest.raises(ParameterError):
            tune_k_cv(ds, 1, [1, 3], RngStream(0))
        with pytest.raises(ParameterError):
            tune_k_cv(ds, 5, [], RngStream(0))
        with pytest.raises(ParameterError):
            tune_k_cv(ds, 5, [100], RngStream(0))


def test_vote_matrix_timings():
    model = train(gaussian_data(300), 0.3, FixedK(1), RngStream(0))
    t = []
    votes = vote_matrix(model, gaussian_data(10).X, timings=t)
    assert votes.shape == (model.s, 10) and len(t) == model.s


def test_predict_dimension_check():
    model = train(gaussian_data(30), 0.0, FixedK(1), RngStream(0))
    with pytest.raises(ParameterError):
        predict(model, [0.0])
