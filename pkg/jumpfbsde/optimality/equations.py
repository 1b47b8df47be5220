"""
Pointwise optimality equation and explicit optimal strategies.

The optimal amount pi solves F(w, pi) = 0 with

    F = U'(x+y) mu + U''(x+y) (z sigma + pi sigma^2)
        + (U'(psi + pi eta + x + y) - U'(x+y)) eta nu.

dF/dpi < U''(x+y) sigma^2 < 0, so the root is unique and lies in
[-|F(w,0)|/g, |F(w,0)|/g] with g = |U''(x+y)| sigma^2 / 2. ``solve_G``
bisects that bracket and finishes with one secant step.

Functions accept numpy arrays for every state field and broadcast.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Union

import numpy as np

from ..core.exceptions import DomainError, NumericalRangeError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..utility.functions import ExponentialUtility, UtilityFunction
from ..utils.roots import at_resolution, bisect_decreasing, secant_polish

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_TOL = 1e-12
ETA_MIN = 1e-8


@dataclass(frozen=True)
class StateTuple:
    """
    Arguments of the optimality equation.

    Attributes:
        x: Wealth left limit
        y: Backward component left limit
        z: Brownian integrand of Y
        psi: Jump integrand of Y
        eta, mu, sigma: Market coefficients at the same time
    """
    x: ArrayLike
    y: ArrayLike
    z: ArrayLike
    psi: ArrayLike
    eta: ArrayLike
    mu: ArrayLike
    sigma: ArrayLike

    @property
    def level(self) -> ArrayLike:
        """x + y."""
        return np.add(self.x, self.y)

    def check_diffusive(self) -> None:
        """
        Raises:
            DomainError: If sigma vanishes or a field is not finite
        """
        for name, value in asdict(self).items():
            if not np.all(np.isfinite(value)):
                raise DomainError(f"state field {name} must be finite")
        if np.any(np.asarray(self.sigma) == 0):
            raise DomainError("residual_F needs sigma^2 > 0; use pure_jump_strategy when sigma = 0")

    def to_dict(self) -> Dict[str, ArrayLike]:
        return asdict(self)


def _residual(
    level: ArrayLike, z: ArrayLike, psi: ArrayLike, eta: ArrayLike, mu: ArrayLike,
    sigma: ArrayLike, pi: ArrayLike, U: UtilityFunction, nu: float
) -> np.ndarray:
    du = U.du(level)
    jump = U.du(np.add(np.add(psi, np.multiply(pi, eta)), level)) - du
    diffusion = np.multiply(z, sigma) + np.multiply(pi, np.square(sigma))
    return du * np.asarray(mu) + U.d2u(level) * diffusion + jump * np.multiply(eta, nu)


def residual_F(w: StateTuple, pi: ArrayLike, U: UtilityFunction, nu: float) -> ArrayLike:
    """
    Evaluate the optimality residual F(w, pi).

    Args:
        w: State tuple (sigma must be nonzero)
        pi: Candidate amount(s) invested
        U: Utility
        nu: Poisson intensity

    Returns:
        Residual value(s)

    Raises:
        DomainError: If sigma = 0
    """
    w.check_diffusive()
    value = _residual(w.level, w.z, w.psi, w.eta, w.mu, w.sigma, pi, U, nu)
    return float(value) if np.ndim(value) == 0 else value


def root_bracket(w: StateTuple, U: UtilityFunction, nu: float) -> np.ndarray:
    """Half-width |F(w,0)|/g of the guaranteed root bracket."""
    f0 = _residual(w.level, w.z, w.psi, w.eta, w.mu, w.sigma, 0.0, U, nu)
    g = 0.5 * np.abs(U.d2u(w.level)) * np.square(w.sigma)
    return np.abs(f0) / g


def solve_G(w: StateTuple, nu: float, U: UtilityFunction, tol: float = DEFAULT_TOL) -> ArrayLike:
    """
    Solve F(w, pi) = 0 for pi.

    Args:
        w: State tuple, arrays broadcast elementwise
        nu: Poisson intensity
        U: Utility with ARA bounded below
        tol: Absolute residual tolerance

    Returns:
        Root(s) pi with |F(w, pi)| <= tol

    Raises:
        DomainError: If sigma = 0
        NumericalRangeError: If the residual is not finite inside the bracket, or
            stays above tol while the bracket is wider than machine resolution
    """
    w.check_diffusive()
    half = root_bracket(w, U, nu)
    if not np.all(np.isfinite(half)):
        raise NumericalRangeError(f"root bracket is not finite for state {w}")
    shape = np.broadcast(w.x, w.y, w.z, w.psi, w.eta, w.mu, w.sigma).shape
    half = np.broadcast_to(half, shape).astype(float)
    fields = [np.broadcast_to(np.asarray(v, dtype=float), shape).reshape(-1)
              for v in (w.level, w.z, w.psi, w.eta, w.mu, w.sigma)]
    level, z, psi, eta, mu, sigma = fields

    def func(p: np.ndarray) -> np.ndarray:
        return _residual(level, z, psi, eta, mu, sigma, p, U, nu)

    lo, hi = bisect_decreasing(func, -half.reshape(-1), half.reshape(-1), ftol=0.0)
    root = secant_polish(func, lo, hi)
    residual = np.abs(func(root))
    above = residual > tol
    if above.any():
        open_bracket = above & ~at_resolution(lo, hi)
        if open_bracket.any():
            k = int(np.argmax(np.where(open_bracket, residual, -np.inf)))
            raise NumericalRangeError(
                f"solve_G residual {residual[k]:.3e} above tol {tol:.1e} at state {k} "
                f"with bracket [{lo[k]!r}, {hi[k]!r}] still open")
        k = int(np.argmax(residual))
        logger.warning(f"solve_G residual {residual[k]:.3e} above tol {tol:.1e} at machine "
                       f"resolution ({int(above.sum())} states, worst state {k})")
    root = root.reshape(shape)
    return float(root) if root.ndim == 0 else root


def merton_strategy(w: StateTuple, U: UtilityFunction) -> ArrayLike:
    """Closed form for eta = 0: pi = (1/sigma)(-(U'/U'')(mu/sigma) - z)."""
    w.check_diffusive()
    tolerance = np.reciprocal(U.ara(w.level))
    value = (tolerance * np.divide(w.mu, w.sigma) - np.asarray(w.z)) / np.asarray(w.sigma)
    return float(value) if np.ndim(value) == 0 else value


def _jump_ratio(mu: ArrayLike, eta: ArrayLike, nu: float, eta_min: float) -> np.ndarray:
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(np.abs(eta_arr) < eta_min):
        raise DomainError(f"pure-jump formula needs |eta| >= eta_min = {eta_min}")
    if not nu > 0:
        raise DomainError("pure-jump formula needs nu > 0")
    m = np.asarray(mu, dtype=float) / (eta_arr * nu)
    if np.any(~(m < 1)):
        raise DomainError("pure-jump formula needs m = mu/(eta nu) < 1")
    return m


def pure_jump_strategy(
    x: ArrayLike, y: ArrayLike, psi: ArrayLike, mu: ArrayLike, eta: ArrayLike, nu: float,
    U: UtilityFunction, eta_min: float = ETA_MIN
) -> ArrayLike:
    """
    Explicit optimal amount in the pure-jump model.

    pi = (1/eta) (inv_du(du(x+y) (1 - m)) - (psi + x + y)), m = mu/(eta nu).

    Raises:
        DomainError: If |eta| < eta_min or m >= 1
    """
    m = _jump_ratio(mu, eta, nu, eta_min)
    level = np.add(x, y)
    shifted = U.inv_du_log(np.asarray(U.log_du(level)) + np.log1p(-m))
    value = (shifted - (np.add(psi, level))) / np.asarray(eta, dtype=float)
    return float(value) if np.ndim(value) == 0 else value


def exponential_pure_jump_strategy(
    psi: ArrayLike, mu: ArrayLike, eta: ArrayLike, nu: float, delta: float,
    eta_min: float = ETA_MIN
) -> ArrayLike:
    """pi = -(1/eta) ((1/delta) ln(1 - mu/(eta nu)) + psi)."""
    m = _jump_ratio(mu, eta, nu, eta_min)
    value = -(np.log1p(-m) / delta + np.asarray(psi, dtype=float)) / np.asarray(eta, dtype=float)
    return float(value) if np.ndim(value) == 0 else value


def pure_jump_first_order_residual(
    x: ArrayLike, y: ArrayLike, psi: ArrayLike, pi: ArrayLike, mu: ArrayLike, eta: ArrayLike,
    nu: float, U: UtilityFunction
) -> ArrayLike:
    """U'(x+y) mu + gamma eta nu with gamma = U'(psi + pi eta + x + y) - U'(x+y)."""
    level = np.add(x, y)
    du = np.asarray(U.du(level))
    gamma = np.asarray(U.du(np.add(np.add(psi, np.multiply(pi, eta)), level))) - du
    value = du * np.asarray(mu) + gamma * np.multiply(eta, nu)
    return float(value) if np.ndim(value) == 0 else value


def deterministic_exponential_strategy(
    coeffs: MarketCoefficients, U: ExponentialUtility, grid: TimeGrid, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """
    Optimal amounts per step for exponential utility with deterministic Y.

    With deterministic coefficients and constant liability, Z = Psi = 0 and
    the optimality equation no longer depends on the wealth level.

    Returns:
        Array of length M, evaluated at the left grid points
    """
    t = grid.times[:-1]
    mu, sigma, eta = coeffs.at(t)
    if coeffs.is_pure_jump:
        return np.asarray(exponential_pure_jump_strategy(0.0, mu, eta, coeffs.nu, U.delta,
                                                         coeffs.eta_min), dtype=float)
    zeros = np.zeros_like(t)
    state = StateTuple(x=zeros, y=zeros, z=zeros, psi=zeros, eta=eta, mu=mu, sigma=sigma)
    return np.asarray(solve_G(state, coeffs.nu, U, tol), dtype=float)


def certify(w: StateTuple, pi: ArrayLike, U: UtilityFunction, nu: float) -> float:
    """Largest absolute residual |F(w, pi)|; the certificate stored next to a strategy."""
    value = np.abs(residual_F(w, pi, U, nu))
    return float(np.max(value)) if np.size(value) else 0.0


