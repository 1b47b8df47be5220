"""
Monte Carlo estimators of the first-order and dominance conditions.

Every estimator integrates all strategies it compares on one PathBundle
(common random numbers), so repeated calls with the same seed are
bit-identical. Paths where the utility overflows are excluded and counted;
more than EXCLUSION_BUDGET of the paths fails the estimate.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..bsde.liability import Liability
from ..core.data_structures import DriftEstimate, EpsilonScan, GapEstimate, GateauxEstimate
from ..core.exceptions import VerificationError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..market.simulation import (PathBundle, integrate_wealth, perturbation_wealth,
                                 simulate_paths, step_returns)
from ..market.strategies import PerturbedStrategy, Strategy
from ..utility.functions import UtilityFunction

logger = logging.getLogger(__name__)

EXCLUSION_BUDGET = 1e-4
MIN_ESS_FRACTION = 0.01


def resolve_paths(
    coeffs: MarketCoefficients, grid: TimeGrid, n_paths: int, seed: int,
    paths: Optional[PathBundle] = None, threads: int = 1
) -> PathBundle:
    """Use ``paths`` when given (checked against the grid), otherwise simulate."""
    if paths is None:
        return simulate_paths(coeffs, grid, n_paths, seed, threads)
    if paths.grid != grid:
        raise VerificationError("path bundle grid does not match the requested grid")
    return paths


def finite_paths(values: np.ndarray, label: str) -> Tuple[np.ndarray, int]:
    """
    Mask of finite per-path values and the excluded count.

    Raises:
        VerificationError: If the excluded share exceeds EXCLUSION_BUDGET
    """
    mask = np.isfinite(values)
    excluded = int(values.size - mask.sum())
    if excluded:
        share = excluded / values.size
        logger.warning(f"{label}: excluded {excluded} of {values.size} paths on overflow")
        if share > EXCLUSION_BUDGET:
            raise VerificationError(
                f"{label}: {excluded} overflowing paths exceed the {EXCLUSION_BUDGET:.2%} budget")
    return mask, excluded


def mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    """Sample mean and standard error sample std / sqrt(n)."""
    n = values.size
    if n == 0:
        raise VerificationError("no paths left to estimate from")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _terminal(liability: Liability, paths: PathBundle) -> np.ndarray:
    return liability.terminal(paths.N[:, -1], paths.W[:, -1])


def gateaux_derivative(
    pi: Strategy,
    h: Strategy,
    U: UtilityFunction,
    liability: Liability,
    coeffs: MarketCoefficients,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    x0: float = 0.0,
    paths: Optional[PathBundle] = None,
    threads: int = 1,
) -> GateauxEstimate:
    """
    Estimate E[U'(X_T^pi + H) X_T^{0,h}].

    Args:
        pi: Strategy at which the derivative is taken
        h: Bounded direction
        U: Utility
        liability: Terminal liability H
        coeffs: Market coefficients
        grid: Time grid
        n_paths: Number of paths (ignored when ``paths`` is given)
        seed: Master seed (ignored when ``paths`` is given)
        x0: Initial capital
        paths: Optional prebuilt bundle
        threads: Worker threads for simulation

    Returns:
        GateauxEstimate

    Raises:
        ConfigurationError: If h exceeds its declared bound
        VerificationError: If too many paths overflow
    """
    paths = resolve_paths(coeffs, grid, n_paths, seed, paths, threads)
    returns = step_returns(paths, coeffs)
    wealth = integrate_wealth(paths, coeffs, pi, x0, returns=returns)
    direction = perturbation_wealth(paths, coeffs, h, returns=returns)
    with np.errstate(over="ignore", invalid="ignore"):
        marginal = np.asarray(U.du(wealth.terminal + _terminal(liability, paths)))
        values = marginal * direction.terminal
    mask, excluded = finite_paths(values, f"gateaux[{pi.label}, {h.label}]")
    mean, se = mean_and_se(values[mask])
    return GateauxEstimate(mean=mean, std_error=se, n_paths=int(mask.sum()), direction=h.label,
                           strategy=pi.label, excluded=excluded)


def _terminal_utility(
    U: UtilityFunction, strategy: Strategy, paths: PathBundle, coeffs: MarketCoefficients,
    x0: float, returns: np.ndarray, H: np.ndarray
) -> np.ndarray:
    wealth = integrate_wealth(paths, coeffs, strategy, x0, returns=returns)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.asarray(U.u(wealth.terminal + H), dtype=float)


def utility_gap(
    pi_a: Strategy,
    pi_b: Strategy,
    U: UtilityFunction,
    liability: Liability,
    coeffs: MarketCoefficients,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    x0: float = 0.0,
    paths: Optional[PathBundle] = None,
    threads: int = 1,
) -> GapEstimate:
    """
    Estimate E[U(X_T^a + H)] - E[U(X_T^b + H)] by per-path differencing.

    Returns:
        GapEstimate, unpackable as (mean, se)
    """
    paths = resolve_paths(coeffs, grid, n_paths, seed, paths, threads)
    returns = step_returns(paths, coeffs)
    H = _terminal(liability, paths)
    ua = _terminal_utility(U, pi_a, paths, coeffs, x0, returns, H)
    ub = _terminal_utility(U, pi_b, paths, coeffs, x0, returns, H)
    with np.errstate(invalid="ignore"):
        diff = ua - ub
    mask, excluded = finite_paths(diff, f"utility_gap[{pi_a.label}, {pi_b.label}]")
    mean, se = mean_and_se(diff[mask])
    return GapEstimate(mean=mean, std_error=se, n_paths=int(mask.sum()), excluded=excluded)


def utility_epsilon_scan(
    pi_star: Strategy,
    h: Strategy,
    epsilons: Sequence[float],
    U: UtilityFunction,
    liability: Liability,
    coeffs: MarketCoefficients,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    x0: float = 0.0,
    paths: Optional[PathBundle] = None,
    threads: int = 1,
) -> EpsilonScan:
    """Expected utility of pi* + eps h for each eps, with gaps against eps = 0."""
    paths = resolve_paths(coeffs, grid, n_paths, seed, paths, threads)
    returns = step_returns(paths, coeffs)
    H = _terminal(liability, paths)
    base = _terminal_utility(U, pi_star, paths, coeffs, x0, returns, H)
    rows = [base if eps == 0 else
            _terminal_utility(U, PerturbedStrategy(pi_star, h, eps), paths, coeffs, x0, returns, H)
            for eps in epsilons]
    table = np.vstack(rows)
    mask, excluded = finite_paths(table.sum(axis=0), "epsilon_scan")
    table = table[:, mask]
    base = base[mask]
    utilities, gaps, ses = [], [], []
    for row in table:
        utilities.append(float(np.mean(row)))
        gap, se = mean_and_se(row - base)
        gaps.append(gap)
        ses.append(se)
    return EpsilonScan(epsilons=[float(e) for e in epsilons], utilities=utilities, gaps=gaps,
                       gap_std_errors=ses, n_paths=int(mask.sum()), excluded=excluded)


def q_measure_drift_check(
    pi_star: Strategy,
    U: UtilityFunction,
    liability: Liability,
    coeffs: MarketCoefficients,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    test_strategies: Sequence[Strategy],
    x0: float = 0.0,
    paths: Optional[PathBundle] = None,
    weighted: bool = True,
    threads: int = 1,
) -> List[DriftEstimate]:
    """
    Mean of the gains of pi - pi* under the measure with density proportional to U'(X_T^* + H).

    The gain of a test strategy is X_T^pi - X_T^{pi*}, the integral of
    pi - pi* against the returns. With ``weighted=False`` the plain
    P-expectation is estimated.

    Returns:
        One DriftEstimate per test strategy
    """
    paths = resolve_paths(coeffs, grid, n_paths, seed, paths, threads)
    returns = step_returns(paths, coeffs)
    star = integrate_wealth(paths, coeffs, pi_star, x0, returns=returns)
    if weighted:
        with np.errstate(over="ignore", invalid="ignore"):
            density = np.asarray(U.du(star.terminal + _terminal(liability, paths)), dtype=float)
    else:
        density = np.ones(paths.n_paths)
    mask, _ = finite_paths(density, "q_measure density")
    weights = density[mask] / np.mean(density[mask])
    ess = float(weights.sum() ** 2 / np.sum(weights**2))
    if ess < MIN_ESS_FRACTION * weights.size:
        logger.warning(f"Q-measure weights degenerate: ESS {ess:.1f} of {weights.size}")

    estimates = []
    for strategy in test_strategies:
        wealth = integrate_wealth(paths, coeffs, strategy, x0, returns=returns)
        gains = (wealth.terminal - star.terminal)[mask]
        mean, se = mean_and_se(weights * gains)
        estimates.append(DriftEstimate(strategy=strategy.label, mean=mean, std_error=se,
                                       weighted=weighted, effective_sample_size=ess,
                                       n_paths=int(mask.sum())))
    return estimates
