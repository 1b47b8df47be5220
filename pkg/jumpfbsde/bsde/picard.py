"""
Picard iteration for the coupled forward-backward system of a general utility.

Each iteration k:

1. integrates wealth X^k under the current strategy table (pi^0 = 0);
2. estimates alpha_i = E[U'(X_T^k + H) | state_i] by polynomial least squares
   on the state (X_i, N_i[, W_i]);
3. estimates the integrands (beta_i, gamma_i) of alpha, either by regressing
   the alpha increments on basis * dW and basis * dn ("increment") or by
   differencing the fitted alpha model across the jump and Brownian moves of
   the next step ("differencing");
4. sets x + y = (U')^{-1}(alpha), Z = beta / U''(x + y) - pi sigma and
   Psi = -pi eta + (U')^{-1}(alpha + gamma) - (x + y), and updates the strategy
   with the pure-jump formula or the root solver.

Convergence is not certified; the diagnostics record the optimality residual
alpha mu + beta sigma + gamma eta nu of every iterate.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..core.data_structures import AdjointProcess, BsdeSolution, PicardDiagnostics
from ..core.exceptions import ConfigurationError, NumericalRangeError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..market.simulation import (PathBundle, WealthPath, integrate_wealth, simulate_paths,
                                 step_returns)
from ..market.strategies import TableStrategy
from ..optimality.equations import DEFAULT_TOL, StateTuple, pure_jump_strategy, solve_G
from ..utility.functions import UtilityFunction
from ..utils.regression import PolynomialModel, fit_columns, fit_model
from .liability import Liability

logger = logging.getLogger(__name__)

ESTIMATORS = ("increment", "differencing")
ALPHA_FLOOR = 1e-8
# clipped share of the (path, step) entries above which clipping is a warning
CLIP_SHARE = 1e-3
DIVERGENCE_RUN = 3


@dataclass
class PicardResult:
    """
    Output of ``picard_solve_coupled``; unpacks as (strategy, solution, adjoint, diagnostics).

    Attributes:
        strategy: Strategy table of the last iterate on ``paths``
        solution: (Y, Z, Psi) per path of the last iterate
        adjoint: (alpha, beta, gamma) of the last iterate
        diagnostics: Per-iteration record
        paths: Bundle the tables refer to
        wealth: Wealth of the last iterate
    """
    strategy: TableStrategy
    solution: BsdeSolution
    adjoint: AdjointProcess
    diagnostics: PicardDiagnostics
    paths: PathBundle
    wealth: WealthPath

    def __iter__(self) -> Iterator[Any]:
        return iter((self.strategy, self.solution, self.adjoint, self.diagnostics))


def _state(paths: PathBundle, X: np.ndarray, i: int, use_w: bool) -> Dict[str, np.ndarray]:
    state = {"x": X[:, i], "n": paths.N[:, i].astype(float)}
    if use_w:
        state["w"] = paths.W[:, i]
    return state


class _AdjointEstimator:
    """Regression of alpha and its integrands for one iterate."""

    def __init__(self, coeffs: MarketCoefficients, U: UtilityFunction, liability: Liability,
                 paths: PathBundle, degree: int, estimator: str):
        self.coeffs = coeffs
        self.U = U
        self.liability = liability
        self.paths = paths
        self.degree = degree
        self.estimator = estimator
        self.use_w = liability.depends_on_brownian
        self.discrete = ("n", "w")
        self.models: List[PolynomialModel] = []
        self.reduced = 0

    def terminal_marginal(self, x: np.ndarray, n: np.ndarray, w: np.ndarray) -> np.ndarray:
        H = self.liability.terminal(np.asarray(n, dtype=np.int64), w)
        return np.asarray(self.U.du(x + H), dtype=float)

    def fit_alpha(self, X: np.ndarray, xi: np.ndarray) -> np.ndarray:
        M = self.paths.grid.M
        alpha = np.empty((self.paths.n_paths, M + 1))
        alpha[:, M] = xi
        self.models = []
        for i in range(M):
            model = fit_model(_state(self.paths, X, i, self.use_w), xi, self.degree,
                              discrete=self.discrete, context=f" for alpha at step {i}")
            self.reduced += int(model.reduced)
            self.models.append(model)
            alpha[:, i] = model.predict(_state(self.paths, X, i, self.use_w))
        return alpha

    def _next_alpha(self, i: int, x: np.ndarray, n: np.ndarray, w: np.ndarray) -> np.ndarray:
        if i + 1 == self.paths.grid.M:
            return self.terminal_marginal(x, n, w)
        return self.models[i + 1].predict({"x": x, "n": n, "w": w})

    def integrands(self, X: np.ndarray, pi: np.ndarray,
                   alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.estimator == "increment":
            return self._by_increments(X, alpha)
        return self._by_differencing(X, pi)

    def _by_increments(self, X: np.ndarray, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        paths = self.paths
        n, M = paths.n_paths, paths.grid.M
        beta = np.zeros((n, M))
        gamma = np.zeros((n, M))
        diffusive = not self.coeffs.is_pure_jump
        jumps = self.coeffs.nu > 0
        for i in range(M):
            B = self.models[i].design(_state(paths, X, i, self.use_w))
            target = alpha[:, i + 1] - alpha[:, i]
            for attempt in (B, np.ones((n, 1))):
                blocks = []
                if diffusive:
                    blocks.append(attempt * paths.dW[:, i:i + 1])
                if jumps:
                    blocks.append(attempt * paths.dn[:, i:i + 1])
                if not blocks:
                    break
                design = np.hstack(blocks)
                coef, rank = fit_columns(design, target)
                if rank == design.shape[1]:
                    break
                logger.debug(f"Increment regression rank {rank} < {design.shape[1]} at step {i}")
                self.reduced += 1
            if not blocks:
                continue
            k = attempt.shape[1]
            offset = 0
            if diffusive:
                beta[:, i] = attempt @ coef[:k]
                offset = k
            if jumps:
                gamma[:, i] = attempt @ coef[offset:offset + k]
        return beta, gamma

    def _by_differencing(self, X: np.ndarray, pi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        paths = self.paths
        grid = paths.grid
        n, M, dt = paths.n_paths, grid.M, grid.dt
        beta = np.zeros((n, M))
        gamma = np.zeros((n, M))
        mu, sigma, eta = self.coeffs.at(grid.times[:-1])
        h = np.sqrt(dt)
        for i in range(M):
            N_i = paths.N[:, i].astype(float)
            W_i = paths.W[:, i]
            p = pi[:, i]
            x_next = X[:, i] + p * (mu[i] - eta[i] * self.coeffs.nu) * dt
            if self.coeffs.nu > 0:
                gamma[:, i] = (self._next_alpha(i, x_next + p * eta[i], N_i + 1, W_i)
                               - self._next_alpha(i, x_next, N_i, W_i))
            if not self.coeffs.is_pure_jump:
                up = self._next_alpha(i, x_next + p * sigma[i] * h, N_i, W_i + h)
                down = self._next_alpha(i, x_next - p * sigma[i] * h, N_i, W_i - h)
                beta[:, i] = (up - down) / (2.0 * h)
        return beta, gamma


def _check_arguments(coeffs: MarketCoefficients, grid: TimeGrid, n_iter: int,
                     regression_degree: int, damping: float, estimator: str) -> None:
    coeffs.validate(grid)
    if isinstance(n_iter, bool) or int(n_iter) != n_iter or n_iter < 0:
        raise ConfigurationError(f"n_iter must be a nonnegative integer, got {n_iter!r}",
                                 key="solver.n_iter")
    if int(regression_degree) != regression_degree or regression_degree < 0:
        raise ConfigurationError("regression_degree must be a nonnegative integer",
                                 key="solver.regression_degree")
    if not 0 < damping <= 1:
        raise ConfigurationError(f"damping must lie in (0, 1], got {damping}",
                                 key="solver.damping")
    if estimator not in ESTIMATORS:
        raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}",
                                 key="solver.estimator")


def picard_solve_coupled(
    coeffs: MarketCoefficients,
    U: UtilityFunction,
    liability: Liability,
    grid: TimeGrid,
    n_paths: int,
    n_iter: int,
    regression_degree: int = 3,
    seed: int = 0,
    x0: float = 0.0,
    damping: float = 1.0,
    estimator: str = "increment",
    threads: int = 1,
    tol: Optional[float] = None,
    paths: Optional[PathBundle] = None,
    solver_tol: float = DEFAULT_TOL,
) -> PicardResult:
    """
    Solve the coupled optimality system by Picard iteration with least-squares Monte Carlo.

    Args:
        coeffs: Market coefficients (diffusive or pure jump)
        U: Utility
        liability: Bounded function of (N_T, W_T)
        grid: Time grid
        n_paths: Number of simulated paths
        n_iter: Number of strategy updates
        regression_degree: Total polynomial degree of the alpha regression
        seed: Master seed of the path bundle
        x0: Initial capital
        damping: Relaxation rho in pi <- (1 - rho) pi + rho update
        estimator: ``increment`` or ``differencing``
        threads: Worker threads for path simulation
        tol: Stop once the residual of an iterate falls below this value
        paths: Reuse an existing bundle instead of simulating one
        solver_tol: Residual tolerance of the pointwise root solver

    Returns:
        PicardResult of the last iterate

    Raises:
        ConfigurationError: On invalid arguments
        NumericalRangeError: If the marginal utility overflows on the paths
    """
    _check_arguments(coeffs, grid, n_iter, regression_degree, damping, estimator)
    if paths is None:
        paths = simulate_paths(coeffs, grid, n_paths, seed, threads)
    n, M = paths.n_paths, grid.M
    times = grid.times
    mu, sigma, eta = coeffs.at(times[:-1])
    returns = step_returns(paths, coeffs)
    H = liability.terminal(paths.N[:, -1], paths.W[:, -1])

    diagnostics = PicardDiagnostics(estimator=estimator)
    pi = np.zeros((n, M))
    rises = 0
    start_time = time.time()

    for k in range(n_iter + 1):
        wealth = integrate_wealth(paths, coeffs, TableStrategy(pi, label=f"picard_{k}"), x0,
                                  returns=returns)
        X = wealth.X
        xi = np.asarray(U.du(X[:, -1] + H), dtype=float)
        if not np.all(np.isfinite(xi)):
            bad = int(np.flatnonzero(~np.isfinite(xi))[0])
            raise NumericalRangeError(
                f"marginal utility overflows at iteration {k} (path {bad}, X_T={X[bad, -1]:.6g})")

        adjoint = _AdjointEstimator(coeffs, U, liability, paths, regression_degree, estimator)
        alpha = adjoint.fit_alpha(X, xi)
        floor = ALPHA_FLOOR * float(np.mean(xi))
        low = alpha[:, :M] < floor
        alpha[:, :M][low] = floor
        beta, gamma = adjoint.integrands(X, pi, alpha)
        jump_low = alpha[:, :M] + gamma < floor
        gamma = np.where(jump_low, floor - alpha[:, :M], gamma)

        a_left = alpha[:, :M]
        ratio = mu + (beta / a_left) * sigma + (gamma / a_left) * eta * coeffs.nu
        residual = float(np.max(np.sqrt(np.mean(ratio**2, axis=0))))
        diagnostics.residual.append(residual)
        diagnostics.alpha_clips.append(int(low.sum()))
        diagnostics.jump_clips.append(int(jump_low.sum()))
        diagnostics.reduced_steps.append(adjoint.reduced)
        n_low, n_jump_low = int(low.sum()), int(jump_low.sum())
        if n_low or n_jump_low:
            share = (n_low + n_jump_low) / (n * M)
            log_level = logging.WARNING if share > CLIP_SHARE else logging.INFO
            logger.log(log_level, f"Iteration {k}: clipped {n_low} alpha and {n_jump_low} "
                                  f"alpha+gamma values to the positivity floor")

        if k > 0 and residual > diagnostics.residual[-2]:
            rises += 1
            if rises >= DIVERGENCE_RUN and not diagnostics.non_convergence:
                diagnostics.non_convergence = True
                logger.warning(f"Picard residual increased on {DIVERGENCE_RUN} consecutive "
                               f"iterations (iteration {k}, residual {residual:.3e})")
        else:
            rises = 0

        level = np.asarray(U.inv_du_log(np.log(a_left)))
        Y_left = level - X[:, :M]
        Z = beta / np.asarray(U.d2u(level)) - pi * sigma
        Psi = -pi * eta + np.asarray(U.inv_du_log(np.log(a_left + gamma))) - level

        logger.info(f"[{k}/{n_iter}] Picard residual={residual:.4e} "
                    f"mean pi={pi.mean():.6g} ({time.time() - start_time:.2f}s)")
        if k == n_iter or (tol is not None and residual <= tol):
            break

        update = np.empty_like(pi)
        for i in range(M):
            if coeffs.is_pure_jump:
                update[:, i] = pure_jump_strategy(X[:, i], Y_left[:, i], Psi[:, i], mu[i], eta[i],
                                                  coeffs.nu, U, coeffs.eta_min)
            else:
                w = StateTuple(x=X[:, i], y=Y_left[:, i], z=Z[:, i], psi=Psi[:, i],
                               eta=eta[i], mu=mu[i], sigma=sigma[i])
                update[:, i] = solve_G(w, coeffs.nu, U, solver_tol)
        new_pi = (1.0 - damping) * pi + damping * update
        diagnostics.strategy_change.append(float(np.max(np.abs(new_pi - pi))))
        pi = new_pi

    diagnostics.mean_strategy = [float(v) for v in pi.mean(axis=0)]
    Y = np.empty((M + 1, n))
    Y[:M] = Y_left.T
    Y[M] = H
    adjoint_process = AdjointProcess(alpha=alpha, beta=beta, gamma=gamma)
    solution = BsdeSolution(
        times=times, Y=Y, Z=Z.T.copy(), Psi=Psi.T.copy(), H=np.asarray(H, dtype=float).copy(),
        representation="paths", scheme="picard", pi=pi.T.copy(),
        adjoint=adjoint_process,
        metadata={
            "n_iter": n_iter,
            "regression_degree": regression_degree,
            "damping": damping,
            "estimator": estimator,
            "seed": paths.seed,
            "x0": x0,
        })
    return PicardResult(strategy=TableStrategy(pi, label="picard"), solution=solution,
                        adjoint=adjoint_process, diagnostics=diagnostics, paths=paths,
                        wealth=wealth)
