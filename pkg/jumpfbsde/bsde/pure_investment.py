"""
Explicit forward-backward solution of the pure investment problem (H = 0)
in the pure-jump model.

Given a rate a(t) with A_t = -int_t^T a_s ds, the strategy

    pi_t = (1/ARA(X_{t-})) (a_t - mu_t/eta_t) / (mu_t - eta_t nu)

drives wealth, Y_t = (U')^{-1}(U'(X_t) e^{A_t}) - X_t, and U'(X_t) e^{A_t}
is the candidate marginal-utility martingale. For exponential utility and
the canonical rate, Psi = 0 and Y_t = (1/delta) int_t^T a_s ds.
"""

import logging
from typing import Callable, Union

import numpy as np

from ..core.data_structures import PureInvestmentSolution
from ..core.exceptions import ConfigurationError, DomainError
from ..market.coefficients import MarketCoefficients
from ..market.simulation import PathBundle, integrate_wealth
from ..market.strategies import FeedbackStrategy
from ..utility.functions import UtilityFunction
from ..utils.quadrature import tail_integrals
from .exponential import canonical_a

logger = logging.getLogger(__name__)

RateSpec = Union[None, float, Callable[[np.ndarray], np.ndarray]]


def _rate_values(rate: RateSpec, coeffs: MarketCoefficients, times: np.ndarray) -> np.ndarray:
    if rate is None:
        mu, _, eta = coeffs.at(times)
        return np.asarray(canonical_a(mu, eta, coeffs.nu), dtype=float)
    if callable(rate):
        values = np.broadcast_to(np.asarray(rate(times), dtype=float), times.shape).copy()
    else:
        values = np.full(times.shape, float(rate))
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("rate a(t) must be finite on the grid", key="solver.rate")
    return values


def construct_pure_investment(
    coeffs: MarketCoefficients,
    U: UtilityFunction,
    paths: PathBundle,
    x0: float,
    a: RateSpec = None,
) -> PureInvestmentSolution:
    """
    Build (X, Y, Psi, pi) along every path of a bundle.

    Args:
        coeffs: Pure-jump coefficients
        U: Utility
        paths: Driver increments
        x0: Initial capital
        a: Rate a(t) as a constant or vectorized function of time; the
            canonical rate when None

    Returns:
        PureInvestmentSolution

    Raises:
        ConfigurationError: If the market is not pure jump
        DomainError: If mu - eta nu vanishes somewhere on the grid
    """
    if not coeffs.is_pure_jump:
        raise ConfigurationError("pure investment construction needs pure_jump mode",
                                 key="market.mode")
    grid = paths.grid
    coeffs.validate(grid)
    times = grid.times
    mu, _, eta = coeffs.at(times)
    gap = mu - eta * coeffs.nu
    if np.any(gap == 0):
        raise DomainError("pure investment strategy needs mu - eta nu != 0 on the grid")

    rate = _rate_values(a, coeffs, times)
    A = -tail_integrals(rate, times)
    A[-1] = 0.0
    tilt = (rate - mu / eta) / gap

    def rule(step: int, t: float, x: np.ndarray, n: np.ndarray, w: np.ndarray) -> np.ndarray:
        return tilt[step] / np.asarray(U.ara(x))

    wealth = integrate_wealth(paths, coeffs, FeedbackStrategy(rule, label="pure_investment"), x0)
    X = wealth.X

    log_du = np.asarray(U.log_du(X))
    log_marginal = log_du + A[None, :]
    Y = np.asarray(U.inv_du_log(log_marginal)) - X
    Y[:, -1] = 0.0

    m = mu[:-1] / (eta[:-1] * coeffs.nu)
    left = log_marginal[:, :-1]
    level = np.asarray(U.inv_du_log(left))
    shifted = np.asarray(U.inv_du_log(left + np.log1p(-m)[None, :]))
    ratio = (mu[:-1] - eta[:-1] * rate[:-1]) / gap[:-1]
    Psi = ratio[None, :] / np.asarray(U.ara(X[:, :-1])) + shifted - level

    logger.info(f"Pure investment solution: A_0={A[0]:.10g}, mean pi={wealth.pi.mean():.8g}")
    return PureInvestmentSolution(times=times, a=rate, A=A, X=X, Y=Y, Psi=Psi, pi=wealth.pi,
                                  log_marginal=log_marginal)


def martingale_jump_identity(
    solution: PureInvestmentSolution, paths: PathBundle, coeffs: MarketCoefficients
) -> np.ndarray:
    """
    Per-step error of log(V_{i+1}/V_i) = dN_i ln(1 - m_i) + m_i nu dt for V = U'(X) e^A.

    Exact for exponential utility, the canonical rate and piecewise-constant
    coefficients.

    Returns:
        Absolute errors, shape (n_paths, M)
    """
    t = paths.grid.times[:-1]
    m = coeffs.jump_ratio(t)
    expected = paths.dN * np.log1p(-m)[None, :] + (m * coeffs.nu * paths.grid.dt)[None, :]
    observed = np.diff(solution.log_marginal, axis=1)
    return np.abs(observed - expected)
