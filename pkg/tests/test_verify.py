import numpy as np
import pytest

from conftest import REFERENCE_PI
from jumpfbsde.bsde.liability import ZeroLiability
from jumpfbsde.core.exceptions import ConfigurationError, DomainError, VerificationError
from jumpfbsde.market.coefficients import TimeGrid
from jumpfbsde.market.simulation import simulate_paths
from jumpfbsde.market.strategies import ConstantStrategy, FeedbackStrategy, StepStrategy
from jumpfbsde.utility.functions import ExponentialUtility
from jumpfbsde.verify.audit import hypothesis_audit
from jumpfbsde.verify.estimators import (finite_paths, gateaux_derivative,
                                         q_measure_drift_check, utility_epsilon_scan, utility_gap)
from jumpfbsde.verify.martingale import (checkpoint_indices, doleans_exponential,
                                         martingale_diagnostic)
from jumpfbsde.verify.suite import CHECKS, VerificationSuite

BAND = 4.0


@pytest.fixture
def pi_star():
    return ConstantStrategy(REFERENCE_PI, label="pi*")


@pytest.fixture
def bundle(reference_market, grid):
    return simulate_paths(reference_market, grid, 20000, seed=7)


@pytest.fixture
def common(reference_market, exp_utility, grid, bundle):
    return {"U": exp_utility, "liability": ZeroLiability(), "coeffs": reference_market,
            "grid": grid, "n_paths": bundle.n_paths, "seed": 7, "paths": bundle}


class TestGateaux:
    def test_vanishes_at_the_optimum(self, pi_star, common, grid):
        for h in (ConstantStrategy(1.0), StepStrategy(1.0, grid.T / 2)):
            estimate = gateaux_derivative(pi_star, h, **common)
            assert abs(estimate.mean) <= BAND * estimate.std_error
            assert estimate.excluded == 0

    def test_detects_a_shifted_strategy(self, common):
        shifted = ConstantStrategy(REFERENCE_PI + 0.2)
        estimate = gateaux_derivative(shifted, ConstantStrategy(1.0), **common)
        assert estimate.mean < 0
        assert abs(estimate.mean) > BAND * estimate.std_error

    def test_direction_bound(self, pi_star, common):
        wide = FeedbackStrategy(lambda step, t, x, n, w: np.full(x.shape, 3.0), bound=1.0)
        with pytest.raises(ConfigurationError):
            gateaux_derivative(pi_star, wide, **common)

    def test_bundle_must_match_grid(self, pi_star, common):
        common = dict(common, grid=TimeGrid(1.0, 7))
        with pytest.raises(VerificationError, match="grid"):
            gateaux_derivative(pi_star, ConstantStrategy(1.0), **common)


class TestUtilityComparisons:
    @pytest.mark.parametrize("epsilon", [-0.4, 0.4])
    def test_perturbations_lose_utility(self, pi_star, common, epsilon):
        gap = utility_gap(ConstantStrategy(REFERENCE_PI + epsilon), pi_star, **common)
        mean, se = gap
        assert mean < 0
        assert abs(mean) > BAND * se

    def test_scan_peaks_at_zero(self, pi_star, common):
        scan = utility_epsilon_scan(pi_star, ConstantStrategy(1.0), [-0.4, -0.2, 0.0, 0.2, 0.4],
                                    **common)
        assert scan.argmax == 0.0
        assert scan.gaps[2] == 0.0

    def test_weighted_drift_vanishes(self, pi_star, common, grid):
        tests = [ConstantStrategy(REFERENCE_PI + 1.0), StepStrategy(1.0, grid.T / 2)]
        weighted = q_measure_drift_check(pi_star, test_strategies=tests, **common)
        assert all(abs(d.mean) <= BAND * d.std_error for d in weighted)
        assert weighted[0].effective_sample_size > 0.5 * weighted[0].n_paths

    def test_unweighted_drift_is_the_excess_return(self, pi_star, common):
        control = q_measure_drift_check(pi_star, test_strategies=[ConstantStrategy(
            REFERENCE_PI + 1.0)], weighted=False, **common)[0]
        assert control.mean == pytest.approx(0.1, abs=BAND * control.std_error)
        assert abs(control.mean) > BAND * control.std_error


class TestMartingaleDiagnostics:
    def test_checkpoints(self):
        np.testing.assert_array_equal(checkpoint_indices(100), np.arange(0, 101, 10))
        small = checkpoint_indices(5)
        assert small[0] == 0 and small[-1] == 5

    def test_doleans_exponential_is_a_martingale(self, reference_market, bundle, grid):
        m = reference_market.jump_ratio(grid.times[:-1])
        checkpoints = checkpoint_indices(grid.M)
        values = doleans_exponential(bundle, -m, theta_w=0.3)
        assert np.all(values[:, 0] == 1.0)
        report = martingale_diagnostic(values[:, checkpoints], checkpoints, label="doleans")
        assert report.max_deviation <= BAND

    def test_detects_drift(self):
        rng = np.random.default_rng(0)
        values = 1.0 + 0.1 * np.arange(5)[None, :] + 0.01 * rng.standard_normal((1000, 5))
        values[:, 0] = 1.0
        assert martingale_diagnostic(values).max_deviation > 100

    def test_constant_process(self):
        assert martingale_diagnostic(np.ones((50, 4))).max_deviation == 0.0

    def test_needs_checkpoints(self):
        with pytest.raises(ConfigurationError):
            martingale_diagnostic(np.ones((10, 0)))

    def test_jump_integrand_above_minus_one(self, bundle):
        with pytest.raises(DomainError):
            doleans_exponential(bundle, -1.0)


class TestAudit:
    def test_stable_moments(self):
        wealth = np.random.default_rng(1).normal(0.0, 0.1, 40000)
        report = hypothesis_audit(ExponentialUtility(1.0), wealth, 0.0)
        assert report.status == "pass"
        assert report.sample_sizes == [10000, 20000, 40000]

    def test_heavy_tails_warn(self):
        wealth = 5.0 * np.random.default_rng(2).standard_cauchy(40000)
        report = hypothesis_audit(ExponentialUtility(1.0), wealth, 0.0)
        assert report.status == "warn"
        assert not report.stable["marginal_second_moment"]

    def test_exclusion_budget(self):
        values = np.ones(20000)
        values[3] = np.inf
        mask, excluded = finite_paths(values, "small")
        assert excluded == 1 and mask.sum() == 19999
        values[:10] = np.nan
        with pytest.raises(VerificationError, match="budget"):
            finite_paths(values, "large")


class TestSuite:
    def suite(self, reference_market, exp_utility, grid, bundle, pi_star, band=BAND):
        return VerificationSuite(reference_market, exp_utility, ZeroLiability(), grid, pi_star,
                                 bundle, band=band)

    def test_reference_optimum_passes(self, reference_market, exp_utility, grid, bundle,
                                      pi_star):
        suite = self.suite(reference_market, exp_utility, grid, bundle, pi_star)
        checks = ["gateaux", "epsilon_scan", "martingale", "q_measure", "audit",
                  "driver_bounds"]
        results = suite.run(checks)
        assert [r.name for r in results] == checks
        assert all(r.passed is not False for r in results), [r.to_dict() for r in results]
        martingale = results[2]
        assert martingale.details["jump_identity_max_error"] <= 1e-12
        assert set(suite.timings) == set(checks)

    def test_tiny_band_fails(self, reference_market, exp_utility, grid, bundle, pi_star):
        suite = self.suite(reference_market, exp_utility, grid, bundle, pi_star, band=1e-6)
        assert suite.run(["gateaux"])[0].passed is False

    def test_inapplicable_checks_are_skipped(self, merton_market):
        grid = TimeGrid(1.0, 10)
        paths = simulate_paths(merton_market, grid, 1000, seed=1)
        suite = VerificationSuite(merton_market, ExponentialUtility(2.0), ZeroLiability(), grid,
                                  ConstantStrategy(0.625), paths)
        results = suite.run(["martingale", "driver_bounds"])
        assert [r.status for r in results] == ["skipped", "skipped"]
        assert all(r.passed is None for r in results)

    def test_unknown_check(self, reference_market, exp_utility, grid, bundle, pi_star):
        suite = self.suite(reference_market, exp_utility, grid, bundle, pi_star)
        with pytest.raises(ConfigurationError, match="verify.checks"):
            suite.run(["gateaux", "sharpe"])

    def test_band_must_be_positive(self, reference_market, exp_utility, grid, bundle, pi_star):
        with pytest.raises(ConfigurationError, match="verify.band"):
            self.suite(reference_market, exp_utility, grid, bundle, pi_star, band=0.0)


@pytest.mark.slow
def test_reference_acceptance_run(reference_market, exp_utility, pi_star):
    grid = TimeGrid(1.0, 100)
    paths = simulate_paths(reference_market, grid, 100_000, seed=7)
    suite = VerificationSuite(reference_market, exp_utility, ZeroLiability(), grid, pi_star,
                              paths, band=3.0)
    results = suite.run(CHECKS)
    assert all(r.passed is not False for r in results), [r.to_dict() for r in results]
