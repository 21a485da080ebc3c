import numpy as np
import pytest
from scipy import stats
from scipy.special import log_ndtr

from selective_bayes import (
    ContractViolationError,
    LowAcceptanceError,
    OutOfEventError,
    Polytope,
    exact_univariate_log_survival,
    exact_univariate_mle,
    mc_adjustment,
    mc_truncated_moment,
    truncated_normal_quantile,
    vacuous_polytope,
)

HALF_LINE = Polytope(np.array([[-1.0]]), np.array([0.0]))


class TestLogSurvival:
    def test_symmetric_point(self):
        assert exact_univariate_log_survival(0.0, 1.0, 0.0) == pytest.approx(
            np.log(0.5), rel=1e-14)

    def test_matches_scipy_moderate_range(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            mu = rng.uniform(-4, 4)
            sigma = rng.uniform(0.2, 3.0)
            c = rng.uniform(-4, 4)
            got = exact_univariate_log_survival(mu, sigma, c)
            ref = stats.norm.logsf(c, mu, sigma)
            assert got == pytest.approx(ref, rel=1e-11, abs=1e-13)

    def test_series_branch_agrees_with_erf_branch(self):
        # the asymptotic branch engages below -8 standardized; scipy's
        # log_ndtr stays accurate there, giving an independent check
        for a in (-8.5, -10.0, -15.0, -25.0, -40.0):
            got = exact_univariate_log_survival(a, 1.0, 0.0)
            assert got == pytest.approx(float(log_ndtr(a)), rel=1e-12)

    def test_deep_tail_frozen_value(self):
        got = exact_univariate_log_survival(-40.0, 1.0, 0.0)
        assert got == pytest.approx(-804.608442013754, abs=1e-9)

    def test_branches_meet_at_switch(self):
        # difference across the switch must be the local slope (hazard of
        # the standard normal at -8, about 8.1) times the gap, nothing more
        eps = 1e-9
        lo = exact_univariate_log_survival(-8.0 - eps, 1.0, 0.0)
        hi = exact_univariate_log_survival(-8.0 + eps, 1.0, 0.0)
        slope = (hi - lo) / (2 * eps)
        assert slope == pytest.approx(8.12136811223618, rel=1e-4)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ContractViolationError):
            exact_univariate_log_survival(0.0, 0.0, 0.0)


class TestExactMle:
    def test_defining_equation(self):
        # beta + phi(beta)/Phi(beta) = y certified to 1e-10
        for y in (0.2, 0.5, 1.0, 2.0, 5.0):
            b = exact_univariate_mle(y)
            resid = b + np.exp(stats.norm.logpdf(b) - stats.norm.logcdf(b)) - y
            assert abs(resid) < 1e-9

    def test_frozen_value_at_two(self):
        assert exact_univariate_mle(2.0) == pytest.approx(
            1.9372571488700498, abs=1e-10)

    def test_shrinks_below_observation(self):
        for y in (0.5, 1.0, 3.0):
            assert exact_univariate_mle(y) < y

    def test_large_y_converges_to_identity(self):
        assert exact_univariate_mle(8.0) == pytest.approx(8.0, abs=1e-6)

    def test_requires_positive_observation(self):
        with pytest.raises(OutOfEventError):
            exact_univariate_mle(-0.5)


class TestTruncatedQuantile:
    def test_round_trips_the_cdf(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            mu = rng.uniform(-3, 3)
            sigma = rng.uniform(0.3, 2.0)
            lower = rng.uniform(-3, 3)
            q = rng.uniform(0.01, 0.98)
            x = truncated_normal_quantile(mu, sigma, lower, q)
            # P(lower < Y <= x) / P(Y > lower) == q
            num = stats.norm.sf(lower, mu, sigma) - stats.norm.sf(x, mu, sigma)
            den = stats.norm.sf(lower, mu, sigma)
            assert num / den == pytest.approx(q, abs=1e-9)

    def test_far_tail_event(self):
        # truncation 40 sigma above the mean still inverts cleanly
        x = truncated_normal_quantile(-40.0, 1.0, 0.0, 0.5)
        assert x > 0.0
        # by the exponential tail approximation the median is about
        # log(2)/40
        assert x == pytest.approx(np.log(2.0) / 40.0, rel=0.05)

    def test_zero_quantile_is_lower_bound(self):
        assert truncated_normal_quantile(1.0, 1.0, 0.5, 0.0) == 0.5

    def test_rejects_bad_q(self):
        with pytest.raises(ContractViolationError):
            truncated_normal_quantile(0.0, 1.0, 0.0, 1.0)

    def test_uniform_inputs_reproduce_the_law(self):
        rng = np.random.default_rng(2)
        u = rng.uniform(size=20000)
        draws = np.array([truncated_normal_quantile(0.5, 1.0, 0.0, q)
                          for q in u])
        # compare empirical mean to the closed-form truncated mean
        alpha = -0.5
        expected = 0.5 + stats.norm.pdf(alpha) / stats.norm.sf(alpha)
        assert draws.mean() == pytest.approx(expected, abs=0.02)


class TestMcAdjustment:
    def test_halfline_probability(self):
        rng = np.random.default_rng(3)
        est = mc_adjustment(np.array([1.0]), HALF_LINE, 1.0, 200000, rng)
        assert est.value == pytest.approx(stats.norm.cdf(1.0), abs=0.005)
        assert est.n_samples == 200000
        assert 0 < est.std_error < 0.002

    def test_vacuous_is_certain(self):
        rng = np.random.default_rng(4)
        est = mc_adjustment(np.zeros(2), vacuous_polytope(2), 1.0, 5000, rng)
        assert est.value == 1.0 and est.std_error == 0.0

    def test_zero_hits_uses_rule_of_three(self):
        rng = np.random.default_rng(5)
        est = mc_adjustment(np.array([-30.0]), HALF_LINE, 1.0, 1000, rng)
        assert est.value == 0.0
        assert est.std_error == pytest.approx(3.0 / 1000)

    def test_minimum_sample_size(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ContractViolationError):
            mc_adjustment(np.array([0.0]), HALF_LINE, 1.0, 500, rng)


class TestMcTruncatedMoment:
    def test_halfline_closed_form(self):
        # W ~ N(0,1), event {1 + W > 0}: E(W | W > -1) = phi(1)/Phi(1)
        rng = np.random.default_rng(7)
        mom = mc_truncated_moment(np.array([1.0]), HALF_LINE, 1.0, 400000, rng)
        expected = stats.norm.pdf(1.0) / stats.norm.cdf(1.0)
        assert mom[0] == pytest.approx(expected, abs=0.005)

    def test_vacuous_mean_is_zero(self):
        rng = np.random.default_rng(8)
        mom = mc_truncated_moment(np.zeros(3), vacuous_polytope(3), 2.0,
                                  100000, rng)
        np.testing.assert_allclose(mom, np.zeros(3), atol=0.02)

    def test_low_acceptance_aborts(self):
        rng = np.random.default_rng(9)
        with pytest.raises(LowAcceptanceError):
            mc_truncated_moment(np.array([-12.0]), HALF_LINE, 1.0, 50000, rng)

    def test_rejects_bad_gamma2(self):
        rng = np.random.default_rng(10)
        with pytest.raises(ContractViolationError):
            mc_truncated_moment(np.array([0.0]), HALF_LINE, 0.0, 1000, rng)
