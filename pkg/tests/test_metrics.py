import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bignn.core import DataError, ParameterError, RngStream
from bignn.metrics import (RESULT_FIELDS, cell_means, disagreement, empirical_cis, empirical_risk,
                           excess_risk, fit_rate, read_results, speedup, write_rate_summary,
                           write_results)
from bignn.synthgen import bayes_classify, eta, sample, sim1_model


class TestRisk:
    def test_examples(self):
        assert empirical_risk([1, 0, 1], [1, 0, 1]) == 0.0
        assert empirical_risk([1, 0, 1], [0, 1, 0]) == 1.0
        assert empirical_risk([1, 0, 1, 0], [1, 1, 1, 1]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            empirical_risk([1, 0], [1])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60),
           st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        p, t = map(list, zip(*pairs))
        idx = list(range(len(p)))
        rnd.shuffle(idx)
        assert empirical_risk(p, t) == empirical_risk([p[i] for i in idx], [t[i] for i in idx])


class TestExcessRisk:
    def test_bayes_classifier_has_zero_regret(self):
        m = sim1_model()
        test = sample(m, 5000, RngStream(0))
        e = eta(m, test.X)
        assert excess_risk(bayes_classify(m, test.X), e) == 0.0

    def test_matches_risk_difference_in_expectation(self):
        # constant-0 classifier: regret = E[(2 eta - 1)+] computed two ways
        m = sim1_model()
        test = sample(m, 200_000, RngStream(1))
        e = eta(m, test.X)
        zeros = np.zeros(len(e), dtype=int)
        diff = empirical_risk(zeros, test.y) - empirical_risk(bayes_classify(m, test.X), test.y)
        assert excess_risk(zeros, e) == pytest.approx(diff, abs=0.004)


class TestCis:
    def test_constant_classifier(self):
        c = empirical_cis(lambda d, r: (lambda X: np.zeros(len(X))), sim1_model(), 50,
                          np.zeros((100, 5)), 3, RngStream(0))
        assert c == 0.0

    def test_coin_flips(self):
        def trainer(data, rng):
            gen = rng.generator()
            return lambda X: gen.integers(0, 2, len(X))

        pairs, m = 20, 500
        c = empirical_cis(trainer, sim1_model(), 20, np.zeros((m, 5)), pairs, RngStream(1))
        assert abs(c - 0.5) <= 3 * math.sqrt(0.25 / (pairs * m))

    def test_one_point_of_thousand(self):
        a = np.zeros(1000, dtype=int)
        b = a.copy()
        b[17] = 1
        assert disagreement(a, b) == 0.001
        assert disagreement(a, b) == disagreement(b, a)


class TestFitRate:
    def test_exact_power_law(self):
        rows = [(0.0, N, 3.0 * N ** (-2 / 7)) for N in (1000, 2000, 4000, 8000)]
        fit = fit_rate(rows)
        assert fit.slope == pytest.approx(-2 / 7, abs=1e-10)
        assert fit.correlation == pytest.approx(1.0, abs=1e-12)

    def test_shared_slope_two_intercepts(self):
        rows = [(g, N, c * N ** -0.5) for g, c in ((0.0, 1.0), (0.2, 4.0)) for N in (100, 400, 1600)]
        fit = fit_rate(rows)
        assert fit.slope == pytest.approx(-0.5, abs=1e-10)
        assert fit.intercepts[0.0] == pytest.approx(0.0, abs=1e-10)
        assert fit.intercepts[0.2] == pytest.approx(math.log(4.0), abs=1e-10)

    def test_zero_value_rejected(self):
        with pytest.raises(DataError, match="row 1"):
            fit_rate([(0.0, 10, 1.0), (0.0, 20, 0.0)])

    def test_rank_and_grid_checks(self):
        with pytest.raises(DataError):
            fit_rate([(0.0, 10, 1.0), (0.1, 10, 2.0)])
        with pytest.raises(DataError):
            fit_rate([(0.0, 10, 1.0), (0.0, 20, 2.0), (0.1, 10, 1.0)])

    def test_normal_equations(self):
        gen = np.random.default_rng(0)
        rows = [(g, N, math.exp(gen.normal()) * N ** -0.3)
                for g in (0.0, 0.1, 0.2) for N in (1000, 2000, 4000, 8000)]
        fit = fit_rate(rows)
        X = np.array([[math.log(N), g == 0.0, g == 0.1, g == 0.2] for g, N, _ in rows], dtype=float)
        np.testing.assert_allclose(X.T @ fit.residuals, 0.0, atol=1e-8 * np.abs(X).max() * len(rows))
        assert -1 <= fit.correlation <= 1 and fit.stderr > 0


class TestSpeedup:
    def test_examples(self):
        assert speedup(10, 5) == 2.0
        assert speedup(1, 1) == 1.0
        with pytest.raises(ParameterError):
            speedup(1, 0)


def test_results_round_trip(tmp_path):
    rows = [dict(method="bignn", N=1000, gamma=0.2, theta=None, I=None, k=3, rep=0, risk=0.125,
                 regret=0.01, cis=0.1 / 3, train_ms=1.5, predict_ms=2.25, seed=7),
            dict(method="denoised", N=1000, gamma=0.2, theta=0.6, I=9, k=3, rep=1, risk=0.5,
                 regret=0.02, cis=None, train_ms=1.0, predict_ms=1.0, seed=7)]
    path = tmp_path / "r.csv"
    write_results(rows, path)
    assert path.read_text().splitlines()[0] == ",".join(RESULT_FIELDS)
    assert read_results(path) == rows


def test_read_results_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("method,N\nbignn,10\n")
    with pytest.raises(DataError):
        read_results(p)


def test_cell_means_and_summary(tmp_path):
    rows = [dict(method="bignn", gamma=0.0, N=10, regret=v) for v in (1.0, 3.0)]
    rows.append(dict(method="bignn", gamma=0.0, N=20, regret=None))
    assert cell_means(rows, "regret") == [(0.0, 10, 2.0)]
    fit = fit_rate([(0.0, 10, 1.0), (0.0, 20, 0.5)])
    write_rate_summary([fit], tmp_path / "s.csv")
    head, line = (tmp_path / "s.csv").read_text().splitlines()
    assert head == "value_kind,slope,stderr,correlation,intercepts"
    assert line.startswith("regret,-1.0")
