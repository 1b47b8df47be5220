"""
Driver path simulation and self-financing wealth integration.

Increments are drawn exactly: dW_i ~ N(0, dt) and dN_i ~ Poisson(nu dt).
Wealth follows X_{i+1} = X_i + pi_i (mu_i dt + sigma_i dW_i + eta_i dn_i)
with the coefficients frozen at the left grid point.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..core.exceptions import ConfigurationError, StrategyEvaluationError
from ..utils.rng import check_seed, draw_increments
from .coefficients import MarketCoefficients, TimeGrid
from .strategies import Strategy

logger = logging.getLogger(__name__)


@dataclass
class PathBundle:
    """
    Brownian and Poisson increments on a time grid.

    Attributes:
        grid: Time grid
        nu: Poisson intensity used for compensation
        seed: Master seed the bundle was drawn from
        dW: Brownian increments, shape (n_paths, M)
        dN: Poisson counts per step, int64, shape (n_paths, M)
    """
    grid: TimeGrid
    nu: float
    seed: int
    dW: np.ndarray
    dN: np.ndarray
    _cache: Dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_paths(self) -> int:
        return int(self.dW.shape[0])

    @property
    def path_index(self) -> np.ndarray:
        """Global stream index of every path."""
        return np.arange(self.n_paths)

    @property
    def dn(self) -> np.ndarray:
        """Compensated increments dN - nu dt."""
        if "dn" not in self._cache:
            self._cache["dn"] = self.dN - self.nu * self.grid.dt
        return self._cache["dn"]

    @property
    def N(self) -> np.ndarray:
        """Jump counts N_i at grid points, shape (n_paths, M + 1)."""
        if "N" not in self._cache:
            counts = np.zeros((self.n_paths, self.grid.M + 1), dtype=np.int64)
            np.cumsum(self.dN, axis=1, out=counts[:, 1:])
            self._cache["N"] = counts
        return self._cache["N"]

    @property
    def W(self) -> np.ndarray:
        """Brownian levels W_i at grid points, shape (n_paths, M + 1)."""
        if "W" not in self._cache:
            levels = np.zeros((self.n_paths, self.grid.M + 1))
            np.cumsum(self.dW, axis=1, out=levels[:, 1:])
            self._cache["W"] = levels
        return self._cache["W"]

    def subset(self, n_paths: int) -> "PathBundle":
        """The first ``n_paths`` paths (identical to drawing that many)."""
        return PathBundle(self.grid, self.nu, self.seed, self.dW[:n_paths], self.dN[:n_paths])

    def with_increments(self, dW: np.ndarray, dN: np.ndarray) -> "PathBundle":
        """Copy with replaced increments; used to probe predictability."""
        return PathBundle(self.grid, self.nu, self.seed, np.asarray(dW, dtype=float),
                          np.asarray(dN, dtype=np.int64))

    def summary(self) -> Dict[str, Any]:
        return {
            "n_paths": self.n_paths,
            "seed": self.seed,
            "T": self.grid.T,
            "M": self.grid.M,
            "nu": self.nu,
            "mean_N_T": float(self.N[:, -1].mean()) if self.n_paths else 0.0,
        }


@dataclass
class WealthPath:
    """
    Wealth along every path of a bundle.

    Attributes:
        x0: Initial capital
        X: Wealth at grid points, shape (n_paths, M + 1)
        pi: Strategy values used on each step, shape (n_paths, M)
        label: Strategy label
    """
    x0: float
    X: np.ndarray
    pi: np.ndarray
    label: str = ""

    @property
    def terminal(self) -> np.ndarray:
        return self.X[:, -1]


def simulate_paths(
    coeffs: MarketCoefficients,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> PathBundle:
    """
    Simulate Brownian and Poisson driver increments.

    Args:
        coeffs: Market coefficients (validated here)
        grid: Time grid
        n_paths: Number of paths
        seed: Master seed
        threads: Worker threads; the bundle does not depend on it

    Returns:
        PathBundle

    Raises:
        ConfigurationError: If the coefficients violate an invariant or n_paths < 1
    """
    if isinstance(n_paths, bool) or int(n_paths) != n_paths or n_paths < 1:
        raise ConfigurationError(f"n_paths must be a positive integer, got {n_paths!r}",
                                 key="mc.n_paths")
    coeffs.validate(grid)
    seed = check_seed(seed)
    dW, dN = draw_increments(seed, int(n_paths), int(grid.M), grid.dt, coeffs.nu, threads)
    logger.info(f"Simulated {n_paths} paths over {grid.M} steps (seed={seed})")
    return PathBundle(grid=grid, nu=coeffs.nu, seed=seed, dW=dW, dN=dN)


def step_returns(paths: PathBundle, coeffs: MarketCoefficients) -> np.ndarray:
    """Return increments mu_i dt + sigma_i dW_i + eta_i dn_i, shape (n_paths, M)."""
    t = paths.grid.times[:-1]
    mu, sigma, eta = coeffs.at(t)
    return mu * paths.grid.dt + sigma * paths.dW + eta * paths.dn


def integrate_wealth(
    paths: PathBundle,
    coeffs: MarketCoefficients,
    strategy: Strategy,
    x0: float,
    returns: Optional[np.ndarray] = None,
) -> WealthPath:
    """
    Integrate self-financing wealth for a strategy.

    Args:
        paths: Driver increments
        coeffs: Market coefficients
        strategy: Predictable strategy
        x0: Initial capital
        returns: Precomputed ``step_returns`` to reuse across strategies

    Returns:
        WealthPath with X_0 = x0 on every path

    Raises:
        StrategyEvaluationError: If the strategy raises or returns a non-finite value
    """
    if returns is None:
        returns = step_returns(paths, coeffs)
    n, M = paths.n_paths, paths.grid.M
    times = paths.grid.times
    N = paths.N
    W = paths.W
    X = np.empty((n, M + 1))
    pi = np.empty((n, M))
    X[:, 0] = x0

    for i in range(M):
        try:
            value = strategy.evaluate(i, float(times[i]), X[:, i], N[:, i], W[:, i])
            pi[:, i] = np.broadcast_to(np.asarray(value, dtype=float), (n,))
        except StrategyEvaluationError:
            raise
        except Exception as e:
            raise StrategyEvaluationError(f"strategy {strategy.label!r} failed: {e}", step=i) from e
        bad = ~np.isfinite(pi[:, i])
        if bad.any():
            raise StrategyEvaluationError(
                f"strategy {strategy.label!r} returned a non-finite value",
                step=i, path=int(np.flatnonzero(bad)[0]))
        X[:, i + 1] = X[:, i] + pi[:, i] * returns[:, i]

    return WealthPath(x0=float(x0), X=X, pi=pi, label=strategy.label)


def perturbation_wealth(
    paths: PathBundle,
    coeffs: MarketCoefficients,
    h: Strategy,
    returns: Optional[np.ndarray] = None,
) -> WealthPath:
    """
    Wealth X^{0,h} of direction ``h`` started from zero capital.

    Raises:
        ConfigurationError: If h exceeds its declared bound
    """
    wealth = integrate_wealth(paths, coeffs, h, 0.0, returns=returns)
    if h.bound is not None and wealth.pi.size and np.max(np.abs(wealth.pi)) > h.bound:
        raise ConfigurationError(f"direction {h.label!r} exceeds its declared bound {h.bound}")
    return wealth
