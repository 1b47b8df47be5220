import numpy as np
import pytest

from conftest import MERTON_PI, REFERENCE_PI
from jumpfbsde.core.exceptions import DomainError, NumericalRangeError
from jumpfbsde.market.coefficients import TimeGrid
from jumpfbsde.optimality import equations
from jumpfbsde.optimality.equations import (StateTuple, certify,
                                            deterministic_exponential_strategy,
                                            exponential_pure_jump_strategy, merton_strategy,
                                            pure_jump_first_order_residual, pure_jump_strategy,
                                            residual_F, root_bracket, solve_G)
from jumpfbsde.utility.functions import ExponentialUtility


def merton_state(z=0.0):
    return StateTuple(x=0.0, y=0.0, z=z, psi=0.0, eta=0.0, mu=0.05, sigma=0.2)


class TestSolveG:
    def test_merton_closed_form(self):
        U = ExponentialUtility(2.0)
        pi = solve_G(merton_state(), nu=1.0, U=U)
        assert pi == pytest.approx(MERTON_PI, abs=1e-10)
        assert certify(merton_state(), pi, U, 1.0) <= 1e-12
        assert merton_strategy(merton_state(), U) == pytest.approx(MERTON_PI, abs=1e-12)

    def test_vectorized_over_states(self):
        U = ExponentialUtility(2.0)
        z = np.array([-0.1, 0.0, 0.1])
        pi = solve_G(merton_state(z), nu=1.0, U=U)
        assert pi.shape == (3,)
        np.testing.assert_allclose(pi, [1.125, 0.625, 0.125], rtol=0, atol=1e-9)

    def test_with_jumps_root_is_bracketed(self):
        U = ExponentialUtility(1.0)
        w = StateTuple(x=0.0, y=0.0, z=0.0, psi=0.0, eta=0.3, mu=0.05, sigma=0.2)
        pi = solve_G(w, nu=1.0, U=U)
        assert certify(w, pi, U, 1.0) <= 1e-12
        assert abs(pi) <= root_bracket(w, U, 1.0)
        assert residual_F(w, pi - 0.01, U, 1.0) > 0
        assert residual_F(w, pi + 0.01, U, 1.0) < 0

    def test_jump_diffusion_root_matches_grid_search(self):
        U = ExponentialUtility(1.0)
        w = StateTuple(x=0.0, y=0.0, z=0.0, psi=0.0, eta=0.5, mu=0.1, sigma=0.2)
        pi = solve_G(w, nu=1.0, U=U)
        grid = np.arange(-2.0, 2.0, 1e-4)
        values = residual_F(w, grid, U, 1.0)
        crossing = grid[np.flatnonzero(values < 0)[0]]
        assert abs(pi - crossing) <= 1e-4
        assert certify(w, pi, U, 1.0) <= 1e-12

    def test_open_bracket_raises(self, monkeypatch):
        monkeypatch.setattr(equations, "bisect_decreasing", lambda func, lo, hi, ftol: (lo, hi))
        w = StateTuple(x=0.0, y=0.0, z=0.0, psi=0.0, eta=0.5, mu=0.1, sigma=0.2)
        with pytest.raises(NumericalRangeError, match="state 0"):
            solve_G(w, nu=1.0, U=ExponentialUtility(1.0))

    def test_mixture_utility(self, mixture_utility):
        w = StateTuple(x=1.0, y=0.2, z=0.05, psi=-0.1, eta=0.3, mu=0.05, sigma=0.2)
        pi = solve_G(w, nu=2.0, U=mixture_utility)
        assert certify(w, pi, mixture_utility, 2.0) <= 1e-12

    def test_residual_needs_volatility(self):
        w = StateTuple(x=0.0, y=0.0, z=0.0, psi=0.0, eta=0.5, mu=0.1, sigma=0.0)
        with pytest.raises(DomainError, match="sigma"):
            residual_F(w, 0.1, ExponentialUtility(1.0), 1.0)
        with pytest.raises(DomainError):
            solve_G(w, 1.0, ExponentialUtility(1.0))

    def test_residual_needs_finite_state(self):
        w = StateTuple(x=np.inf, y=0.0, z=0.0, psi=0.0, eta=0.5, mu=0.1, sigma=0.2)
        with pytest.raises(DomainError, match="finite"):
            residual_F(w, 0.1, ExponentialUtility(1.0), 1.0)


class TestPureJump:
    def test_exponential_closed_form(self):
        assert exponential_pure_jump_strategy(0.0, 0.1, 0.5, 1.0, 1.0) == pytest.approx(
            REFERENCE_PI, abs=1e-8)

    def test_general_formula_matches_closed_form(self, exp_utility):
        general = pure_jump_strategy(0.3, 0.1, -0.05, 0.1, 0.5, 1.0, exp_utility)
        closed = exponential_pure_jump_strategy(-0.05, 0.1, 0.5, 1.0, 1.0)
        assert general == pytest.approx(closed, abs=1e-12)

    def test_exponential_amount_ignores_wealth(self, exp_utility):
        low = pure_jump_strategy(0.0, 0.0, 0.0, 0.1, 0.5, 1.0, exp_utility)
        high = pure_jump_strategy(5.0, 0.0, 0.0, 0.1, 0.5, 1.0, exp_utility)
        assert low == pytest.approx(high, abs=1e-12)

    def test_mixture_solves_first_order_condition(self, mixture_utility):
        x = np.array([-1.0, 0.0, 2.0, 5.0])
        pi = pure_jump_strategy(x, 0.1, 0.05, 0.1, 0.5, 1.0, mixture_utility)
        residual = pure_jump_first_order_residual(x, 0.1, 0.05, pi, 0.1, 0.5, 1.0,
                                                  mixture_utility)
        assert np.max(np.abs(residual)) <= 1e-10
        assert not np.isclose(pi[0], pi[-1])

    def test_ratio_at_or_above_one(self, exp_utility):
        with pytest.raises(DomainError, match="m = mu"):
            pure_jump_strategy(0.0, 0.0, 0.0, 0.6, 0.5, 1.0, exp_utility)

    def test_tiny_jump_size(self, exp_utility):
        with pytest.raises(DomainError, match="eta_min"):
            pure_jump_strategy(0.0, 0.0, 0.0, 0.1, 1e-10, 1.0, exp_utility)


class TestDeterministicStrategy:
    def test_reference_market(self, reference_market, exp_utility):
        pi = deterministic_exponential_strategy(reference_market, exp_utility, TimeGrid(1.0, 10))
        assert pi.shape == (10,)
        np.testing.assert_allclose(pi, REFERENCE_PI, rtol=0, atol=1e-8)

    def test_merton_market(self, merton_market):
        pi = deterministic_exponential_strategy(merton_market, ExponentialUtility(2.0),
                                                TimeGrid(1.0, 4))
        np.testing.assert_allclose(pi, MERTON_PI, rtol=0, atol=1e-10)
