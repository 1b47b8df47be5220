import logging

import numpy as np
import pytest

from conftest import MERTON_PI, REFERENCE_PI
from jumpfbsde.bsde import picard
from jumpfbsde.bsde.liability import (ConstantLiability, CountTableLiability,
                                      FunctionalLiability, ZeroLiability, build_liability)
from jumpfbsde.bsde.picard import picard_solve_coupled
from jumpfbsde.core.exceptions import ConfigurationError
from jumpfbsde.market.coefficients import TimeGrid
from jumpfbsde.optimality.equations import (StateTuple, certify,
                                            deterministic_exponential_strategy)
from jumpfbsde.utility.functions import ExponentialUtility


class TestLiabilities:
    def test_build_from_config(self):
        assert isinstance(build_liability({}), ZeroLiability)
        assert build_liability({"kind": "constant", "value": 0.3}).constant_value == 0.3
        table = build_liability({"kind": "table", "table": [0.0, 0.5]})
        np.testing.assert_array_equal(table.of_count(np.array([0, 1, 4])), [0.0, 0.5, 0.5])
        assert table.constant_value is None
        with pytest.raises(ConfigurationError, match="liability.kind"):
            build_liability({"kind": "barrier"})

    def test_rejects_unbounded_values(self):
        with pytest.raises(ConfigurationError, match="liability.value"):
            ConstantLiability(float("inf"))
        with pytest.raises(ConfigurationError, match="liability.table"):
            CountTableLiability([])

    def test_functional_liability(self):
        H = FunctionalLiability(lambda n, w: 0.1 * np.tanh(w), bound=0.1, label="tanh")
        values = H.terminal(np.array([0, 2]), np.array([0.0, 50.0]))
        np.testing.assert_allclose(values, [0.0, 0.1])
        with pytest.raises(ConfigurationError, match="W_T"):
            H.of_count(np.array([0, 1]))
        assert H.to_dict() == {"kind": "functional", "label": "tanh", "bound": 0.1}

    def test_functional_liability_bound_is_checked(self):
        H = FunctionalLiability(lambda n, w: 0.5 * n, bound=1.0, depends_on_brownian=False)
        np.testing.assert_allclose(H.of_count(np.array([0, 2])), [0.0, 1.0])
        with pytest.raises(ConfigurationError, match="bound"):
            H.of_count(np.array([3]))


class TestPicardArguments:
    def test_unknown_estimator(self, reference_market, exp_utility):
        with pytest.raises(ConfigurationError, match="solver.estimator"):
            picard_solve_coupled(reference_market, exp_utility, ZeroLiability(), TimeGrid(1.0, 4),
                                 n_paths=100, n_iter=1, estimator="finite")

    @pytest.mark.parametrize("damping", [0.0, 1.5])
    def test_damping_range(self, reference_market, exp_utility, damping):
        with pytest.raises(ConfigurationError, match="solver.damping"):
            picard_solve_coupled(reference_market, exp_utility, ZeroLiability(), TimeGrid(1.0, 4),
                                 n_paths=100, n_iter=1, damping=damping)

    def test_negative_iterations(self, reference_market, exp_utility):
        with pytest.raises(ConfigurationError, match="solver.n_iter"):
            picard_solve_coupled(reference_market, exp_utility, ZeroLiability(), TimeGrid(1.0, 4),
                                 n_paths=100, n_iter=-1)


class TestPicardSmall:
    def test_stops_at_tolerance(self, reference_market, exp_utility):
        result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(),
                                      TimeGrid(1.0, 5), n_paths=500, n_iter=5, seed=1, tol=1.0)
        assert result.diagnostics.iterations == 0
        assert len(result.diagnostics.residual) == 1
        assert np.all(result.strategy.table == 0.0)

    def test_result_unpacks_and_ends_at_liability(self, reference_market, exp_utility):
        liability = CountTableLiability([0.0, 0.2])
        strategy, solution, adjoint, diagnostics = picard_solve_coupled(
            reference_market, exp_utility, liability, TimeGrid(1.0, 5), n_paths=1000, n_iter=2,
            seed=2)
        assert solution.terminal_matches()
        assert solution.representation == "paths"
        assert strategy.table.shape == (1000, 5)
        assert adjoint.alpha.shape == (1000, 6)
        assert len(diagnostics.residual) == 3
        assert len(diagnostics.strategy_change) == 2
        assert not diagnostics.non_convergence

    def test_brownian_liability(self, merton_market):
        liability = FunctionalLiability(lambda n, w: 0.1 * np.tanh(w), bound=0.1)
        result = picard_solve_coupled(merton_market, ExponentialUtility(2.0), liability,
                                      TimeGrid(1.0, 5), n_paths=1000, n_iter=1, seed=9)
        assert result.solution.terminal_matches()
        np.testing.assert_allclose(result.solution.H,
                                   0.1 * np.tanh(result.paths.W[:, -1]))
        assert np.all(np.isfinite(result.strategy.table))

    def test_first_update_is_the_closed_form(self, reference_market, exp_utility):
        result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(),
                                      TimeGrid(1.0, 5), n_paths=500, n_iter=1, seed=3)
        np.testing.assert_allclose(result.diagnostics.mean_strategy, REFERENCE_PI, rtol=1e-6)

    def test_first_update_on_jump_diffusion_market(self, jump_diffusion_market, exp_utility):
        grid = TimeGrid(1.0, 5)
        closed = deterministic_exponential_strategy(jump_diffusion_market, exp_utility, grid)
        zeros = np.zeros(1)
        state = StateTuple(x=zeros, y=zeros, z=zeros, psi=zeros, eta=0.5, mu=0.1, sigma=0.2)
        assert certify(state, closed[:1], exp_utility, 1.0) <= 1e-12
        assert 0.3 < closed[0] < 0.45

        result = picard_solve_coupled(jump_diffusion_market, exp_utility, ZeroLiability(), grid,
                                      n_paths=2000, n_iter=1, seed=10)
        np.testing.assert_allclose(result.diagnostics.mean_strategy, closed, rtol=1e-6)

    def test_widespread_clipping_is_a_warning(self, reference_market, exp_utility, monkeypatch,
                                              caplog):
        monkeypatch.setattr(picard, "ALPHA_FLOOR", 10.0)
        with caplog.at_level(logging.INFO, logger="jumpfbsde.bsde.picard"):
            result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(),
                                          TimeGrid(1.0, 4), n_paths=200, n_iter=0, seed=12)
        assert result.diagnostics.alpha_clips == [200 * 4]
        clip_records = [r for r in caplog.records if "positivity floor" in r.getMessage()]
        assert [r.levelno for r in clip_records] == [logging.WARNING]

    def test_jump_integrand_has_the_sign_of_a_wealth_jump(self, jump_diffusion_market,
                                                          exp_utility):
        result = picard_solve_coupled(jump_diffusion_market, exp_utility, ZeroLiability(),
                                      TimeGrid(1.0, 5), n_paths=2000, n_iter=1, seed=10)
        pi = result.diagnostics.mean_strategy[0]
        alpha = result.adjoint.alpha[:, :-1]
        ratio = np.median(result.adjoint.gamma / alpha)
        assert ratio == pytest.approx(np.expm1(-exp_utility.delta * pi * 0.5), abs=0.05)
        assert -1.0 < ratio < 0.0

    def test_differencing_estimator(self, reference_market, mixture_utility):
        result = picard_solve_coupled(reference_market, mixture_utility, ZeroLiability(),
                                      TimeGrid(1.0, 5), n_paths=2000, n_iter=2, seed=4,
                                      estimator="differencing")
        assert np.all(np.isfinite(result.strategy.table))
        assert result.diagnostics.residual[-1] < result.diagnostics.residual[0]

    def test_reuses_given_bundle(self, reference_market, exp_utility):
        from jumpfbsde.market.simulation import simulate_paths

        grid = TimeGrid(1.0, 5)
        paths = simulate_paths(reference_market, grid, 300, seed=8)
        result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(), grid,
                                      n_paths=300, n_iter=1, paths=paths)
        assert result.paths is paths
        assert result.solution.metadata["seed"] == 8


@pytest.mark.slow
class TestPicardConvergence:
    def test_reference_pure_jump(self, reference_market, exp_utility):
        result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(),
                                      TimeGrid(1.0, 10), n_paths=20000, n_iter=1, seed=5)
        np.testing.assert_allclose(result.diagnostics.mean_strategy, REFERENCE_PI, rtol=0.02)
        assert result.diagnostics.residual_drop() >= 10.0

    def test_merton(self, merton_market):
        result = picard_solve_coupled(merton_market, ExponentialUtility(2.0), ZeroLiability(),
                                      TimeGrid(1.0, 10), n_paths=20000, n_iter=1, seed=6)
        np.testing.assert_allclose(result.diagnostics.mean_strategy, MERTON_PI, rtol=0.02)
        assert result.diagnostics.residual_drop() >= 10.0

    def test_jump_diffusion(self, jump_diffusion_market, exp_utility):
        grid = TimeGrid(1.0, 10)
        closed = deterministic_exponential_strategy(jump_diffusion_market, exp_utility, grid)
        result = picard_solve_coupled(jump_diffusion_market, exp_utility, ZeroLiability(), grid,
                                      n_paths=20000, n_iter=2, seed=11)
        np.testing.assert_allclose(result.diagnostics.mean_strategy, closed, rtol=0.1)

    def test_further_iterations_stay_near_the_optimum(self, reference_market, exp_utility):
        result = picard_solve_coupled(reference_market, exp_utility, ZeroLiability(),
                                      TimeGrid(1.0, 10), n_paths=20000, n_iter=3, seed=7)
        assert result.diagnostics.iterations == 3
        np.testing.assert_allclose(result.diagnostics.mean_strategy, REFERENCE_PI, rtol=0.1)
        assert not result.diagnostics.non_convergence
