import numpy as np
import pytest

from conftest import REFERENCE_PI, REFERENCE_Y0
from jumpfbsde.bsde.pure_investment import construct_pure_investment, martingale_jump_identity
from jumpfbsde.core.exceptions import ConfigurationError
from jumpfbsde.market.coefficients import TimeGrid
from jumpfbsde.market.simulation import simulate_paths


@pytest.fixture
def reference_paths(reference_market):
    return simulate_paths(reference_market, TimeGrid(1.0, 50), 2000, seed=11)


class TestExponentialPureInvestment:
    def test_jump_integrand_vanishes(self, reference_market, exp_utility, reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0)
        assert np.max(np.abs(solution.Psi)) <= 1e-12

    def test_backward_component_is_deterministic(self, reference_market, exp_utility,
                                                 reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0)
        np.testing.assert_allclose(solution.Y[:, 0], REFERENCE_Y0, rtol=0, atol=1e-8)
        assert np.all(solution.Y[:, -1] == 0.0)
        assert np.ptp(solution.Y[:, 10]) <= 1e-12

    def test_strategy_is_the_closed_form(self, reference_market, exp_utility, reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0)
        np.testing.assert_allclose(solution.pi, REFERENCE_PI, rtol=0, atol=1e-8)

    def test_marginal_jump_identity(self, reference_market, exp_utility, reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0)
        errors = martingale_jump_identity(solution, reference_paths, reference_market)
        assert errors.shape == (2000, 50)
        assert np.max(errors) <= 1e-12

    def test_marginal_process_is_normalized(self, reference_market, exp_utility,
                                            reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0)
        np.testing.assert_allclose(solution.log_marginal[:, 0], solution.A[0], atol=1e-14)
        marginal = solution.marginal_process()
        assert np.all(marginal[:, 0] == 1.0)
        assert marginal[:, -1].mean() == pytest.approx(1.0, abs=0.1)


class TestGeneralPureInvestment:
    def test_mixture_utility(self, reference_market, mixture_utility, reference_paths):
        solution = construct_pure_investment(reference_market, mixture_utility,
                                             reference_paths, 0.5)
        assert np.all(np.isfinite(solution.Y))
        assert np.all(solution.X[:, 0] == 0.5)
        assert np.all(solution.Y[:, -1] == 0.0)

    def test_custom_rate(self, reference_market, exp_utility, reference_paths):
        solution = construct_pure_investment(reference_market, exp_utility, reference_paths, 0.0,
                                             a=0.05)
        np.testing.assert_allclose(solution.Y[:, 0], 0.05, rtol=0, atol=1e-10)
        assert np.max(np.abs(solution.Psi)) > 1e-6

    def test_needs_pure_jump_market(self, merton_market, exp_utility):
        paths = simulate_paths(merton_market, TimeGrid(1.0, 10), 10, seed=1)
        with pytest.raises(ConfigurationError, match="market.mode"):
            construct_pure_investment(merton_market, exp_utility, paths, 0.0)
