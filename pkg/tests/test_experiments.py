import dataclasses

import numpy as np
import pytest
from scipy import stats

from selective_bayes import (
    ConsistencyConfig,
    ConsistencyReport,
    ContractViolationError,
    FcrConfig,
    consistency_experiment,
    run_fcr_experiment,
    univariate_curves,
)
from selective_bayes.experiments import FCR_METHODS


class TestUnivariateCurves:
    def setup_method(self):
        self.mu = np.arange(-4.0, 4.0 + 1e-9, 0.25)
        self.y = np.arange(-2.0, 4.0 + 1e-9, 0.5)
        self.table = univariate_curves(self.mu, self.y)

    def test_exact_column_is_gaussian_tail(self):
        ref = stats.norm.logcdf(self.mu)
        np.testing.assert_allclose(self.table.exact_log_probability, ref,
                                   rtol=1e-10)

    def test_chernoff_upper_bounds_exact(self):
        assert np.all(self.table.chernoff_log_probability
                      >= self.table.exact_log_probability - 1e-12)

    def test_barrier_below_chernoff(self):
        assert np.all(self.table.barrier_log_probability
                      <= self.table.chernoff_log_probability + 1e-12)

    def test_barrier_closer_than_chernoff_on_average(self):
        exact = self.table.exact_log_probability
        mae_b = np.mean(np.abs(self.table.barrier_log_probability - exact))
        mae_c = np.mean(np.abs(self.table.chernoff_log_probability - exact))
        assert mae_b < mae_c

    def test_estimator_columns(self):
        t = self.table
        np.testing.assert_array_equal(t.unadjusted, self.y)
        inside = self.y > 0
        assert np.all(np.isnan(t.exact_mle[~inside]))
        assert np.all(np.isnan(t.approximate_mle[~inside]))
        assert np.all(np.isfinite(t.exact_mle[inside]))
        # both selective estimates shrink below the observation
        assert np.all(t.exact_mle[inside] < self.y[inside])
        assert np.all(t.approximate_mle[inside] < self.y[inside])
        ref = self.y[inside] - 1.0 / (self.y[inside] * (self.y[inside] + 1.0))
        np.testing.assert_allclose(t.approximate_mle[inside], ref, atol=1e-12)

    def test_randomized_column_defined_everywhere(self):
        t = self.table
        assert np.all(np.isfinite(t.randomized_mle))
        assert np.all(t.randomized_mle < self.y)

    def test_grid_validation(self):
        with pytest.raises(ContractViolationError):
            univariate_curves([0.0, -1.0], [1.0, 2.0])
        with pytest.raises(ContractViolationError):
            univariate_curves([0.0, np.inf], [1.0, 2.0])
        with pytest.raises(ContractViolationError):
            univariate_curves([0.0, 1.0], [2.0, 2.0])

    def test_empty_grids_allowed(self):
        t = univariate_curves([], [])
        assert t.mu_values.shape == (0,)
        assert t.randomized_mle.shape == (0,)


class TestFcrExperiment:
    CONFIG = FcrConfig(rounds=2, draws=800, seed=3)

    def test_report_structure(self):
        rep = run_fcr_experiment(self.CONFIG)
        assert rep.rounds == 2
        assert len(rep.records) == 2
        for m in FCR_METHODS:
            assert m in rep.coverage and m in rep.fcr and m in rep.skipped
            if not np.isnan(rep.coverage[m]):
                assert 0.0 <= rep.coverage[m] <= 1.0
                assert rep.coverage[m] + rep.fcr[m] == pytest.approx(1.0)
            assert 0 <= rep.skipped[m] <= 2
        for rec in rep.records:
            for m, entry in rec["methods"].items():
                if entry["size"]:
                    assert len(entry["covered"]) == entry["size"]
                    assert len(entry["lengths"]) == entry["size"]
                    assert all(v > 0 for v in entry["lengths"])

    def test_seed_determinism(self):
        a = run_fcr_experiment(self.CONFIG)
        b = run_fcr_experiment(self.CONFIG)
        assert a.coverage == b.coverage
        assert a.records == b.records

    def test_thread_count_does_not_change_results(self):
        a = run_fcr_experiment(self.CONFIG)
        b = run_fcr_experiment(dataclasses.replace(self.CONFIG, threads=2))
        assert a.coverage == b.coverage
        assert a.records == b.records

    def test_adjusted_intervals_wider_than_unadjusted(self):
        rep = run_fcr_experiment(self.CONFIG)
        for rec in rep.records:
            un = rec["methods"]["unadjusted"]
            ad = rec["methods"]["adjusted"]
            if un["size"] and ad["size"]:
                assert np.mean(ad["lengths"]) > 0.5 * np.mean(un["lengths"])


class TestConsistencyExperiment:
    def test_replication_floor(self):
        with pytest.raises(ContractViolationError):
            ConsistencyReport(n_values=(100,), median_errors={},
                              replications=50, seed=0, beta_star=-0.5,
                              gamma2=1.0)

    def test_signal_sign_enforced(self):
        with pytest.raises(ContractViolationError):
            consistency_experiment(ConsistencyConfig(beta_star=0.5))

    def test_error_shapes_and_trends(self):
        rep = consistency_experiment(ConsistencyConfig(
            n_values=(100, 2500), replications=200, seed=0))
        assert set(rep.median_errors) == {"nonrandomized", "randomized",
                                          "unadjusted"}
        rand = rep.median_errors["randomized"]
        assert len(rand) == 2
        # randomization lets the estimator learn: error shrinks with n
        assert rand[1] < rand[0]
        # the unadjusted estimate stalls near |beta*| gamma^2/(1+gamma^2)
        assert rep.median_errors["unadjusted"][1] == pytest.approx(0.25,
                                                                   abs=0.1)
        # without randomization the estimator stays inconsistent
        assert rep.median_errors["nonrandomized"][1] >= 0.1
