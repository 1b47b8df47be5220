"""
Backward equation of the exponential utility in the pure-jump model.

Drivers are stored in generator form: dY = -f dt + Z dW + Psi dn, with

    f(z, psi) = sup_pi { pi mu - [-psi - pi eta]_delta } - delta z^2 / 2
              = (nu/delta)(1-m) ln(1-m) - (mu/eta)(psi - 1/delta) - delta z^2 / 2,

where m = mu/(eta nu) and [q]_delta = (nu/delta)(e^{delta q} - 1 - delta q).

Two exact tiers are provided: the deterministic reduction for constant H
(Z = Psi = 0) and backward induction on the Poisson lattice (t_i, n) for
H = H(N_T).
"""

import logging
from typing import Any, Callable, Dict, Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.stats import poisson

from ..core.data_structures import BsdeSolution, DriverBoundReport
from ..core.exceptions import ConfigurationError, DomainError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..optimality.equations import exponential_pure_jump_strategy
from ..utils.quadrature import tail_integrals
from .liability import MAX_ABS_LIABILITY, Liability

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
CountFunction = Union[Liability, Callable[[np.ndarray], np.ndarray]]

DEFAULT_TAIL_EPS = 1e-12


def _ratio(mu: ArrayLike, eta: ArrayLike, nu: float) -> np.ndarray:
    eta_arr = np.asarray(eta, dtype=float)
    if not nu > 0 or np.any(eta_arr == 0):
        raise DomainError("exponential driver needs eta != 0 and nu > 0")
    m = np.asarray(mu, dtype=float) / (eta_arr * nu)
    if np.any(~(m < 1)):
        raise DomainError("exponential driver needs m = mu/(eta nu) < 1")
    return m


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def bracket_delta(q: ArrayLike, nu: float, delta: float) -> ArrayLike:
    """[q]_delta = (nu/delta)(exp(delta q) - 1 - delta q)."""
    dq = delta * np.asarray(q, dtype=float)
    return _out(nu / delta * (np.expm1(dq) - dq))


def canonical_a(mu: ArrayLike, eta: ArrayLike, nu: float) -> ArrayLike:
    """
    Rate a = (m + (1-m) ln(1-m)) nu; nonnegative for every m < 1.

    Raises:
        DomainError: If m >= 1
    """
    m = _ratio(mu, eta, nu)
    return _out((m + (1.0 - m) * np.log1p(-m)) * nu)


def exponential_driver(
    z: ArrayLike, psi: ArrayLike, mu: ArrayLike, eta: ArrayLike, nu: float, delta: float
) -> ArrayLike:
    """
    Closed-form driver f(z, psi) in generator form.

    Raises:
        DomainError: If m >= 1
    """
    m = _ratio(mu, eta, nu)
    z_arr = np.asarray(z, dtype=float)
    value = (nu / delta * (1.0 - m) * np.log1p(-m)
             - np.divide(mu, eta) * (np.asarray(psi, dtype=float) - 1.0 / delta)
             - 0.5 * delta * z_arr**2)
    return _out(value)


def exponential_driver_sup(
    z: ArrayLike, psi: ArrayLike, mu: ArrayLike, eta: ArrayLike, nu: float, delta: float
) -> ArrayLike:
    """Driver from its variational form, evaluated at the maximizing pi."""
    pi = exponential_pure_jump_strategy(psi, mu, eta, nu, delta)
    arg = -np.asarray(psi, dtype=float) - np.multiply(pi, eta)
    value = (np.multiply(pi, mu) - np.asarray(bracket_delta(arg, nu, delta))
             - 0.5 * delta * np.square(z))
    return _out(value)


def exponential_generator_integrand(
    z: ArrayLike, psi: ArrayLike, mu: ArrayLike, eta: ArrayLike, nu: float, delta: float
) -> ArrayLike:
    """
    dt-integrand of the backward equation written as Y_t = H - int(...) ds - int(Z dW + Psi dn).

    delta z^2/2 - (nu/delta)(1-m) ln(1-m) + (mu/eta)(psi - 1/delta); equals -f.
    """
    m = _ratio(mu, eta, nu)
    value = (0.5 * delta * np.square(z) - nu / delta * (1.0 - m) * np.log1p(-m)
             + np.divide(mu, eta) * (np.asarray(psi, dtype=float) - 1.0 / delta))
    return _out(value)


def _check_pure_jump(coeffs: MarketCoefficients, grid: TimeGrid) -> None:
    if not coeffs.is_pure_jump:
        raise ConfigurationError("exponential backward equation tiers need pure_jump mode",
                                 key="market.mode")
    coeffs.validate(grid)


def deterministic_Y(
    coeffs: MarketCoefficients, delta: float, H_const: float, grid: TimeGrid
) -> np.ndarray:
    """
    Y(t_i) = H + (1/delta) int_{t_i}^T a_s ds with the canonical rate, by composite Simpson.

    Returns:
        Array of length M + 1

    Raises:
        DomainError: If m >= 1 somewhere on the grid
    """
    _check_pure_jump(coeffs, grid)
    times = grid.times
    mu, _, eta = coeffs.at(times)
    a = np.asarray(canonical_a(mu, eta, coeffs.nu))
    return H_const + tail_integrals(a, times) / delta


def deterministic_solution(
    coeffs: MarketCoefficients, delta: float, H_const: float, grid: TimeGrid
) -> BsdeSolution:
    """``deterministic_Y`` packaged with Z = Psi = 0 and the explicit strategy."""
    Y = deterministic_Y(coeffs, delta, H_const, grid)
    Y[-1] = H_const
    mu, _, eta = coeffs.at(grid.times[:-1])
    pi = np.asarray(exponential_pure_jump_strategy(0.0, mu, eta, coeffs.nu, delta, coeffs.eta_min))
    M = grid.M
    return BsdeSolution(
        times=grid.times, Y=Y[:, None], Z=np.zeros((M, 1)), Psi=np.zeros((M, 1)),
        H=np.array([H_const]), representation="deterministic", scheme="ode",
        pi=pi[:, None], metadata={"quadrature": "composite simpson", "delta": delta})


def poisson_step_kernel(rate: float, tail_eps: float) -> Tuple[np.ndarray, float]:
    """
    Truncated Poisson(rate) weights on 0..k_max with the tail mass lumped on k_max.

    Returns:
        Tuple (weights, lumped tail mass)
    """
    k_max = max(1, int(poisson.isf(tail_eps, rate)) + 1) if rate > 0 else 1
    k = np.arange(k_max + 1)
    weights = poisson.pmf(k, rate)
    tail = float(poisson.sf(k_max - 1, rate)) if rate > 0 else 0.0
    weights[-1] = tail
    return weights, tail - float(poisson.pmf(k_max, rate))


def lattice_size(coeffs: MarketCoefficients, grid: TimeGrid, tail_eps: float) -> int:
    """n_max with Poisson tail <= tail_eps at the largest relevant intensity times T."""
    m = coeffs.jump_ratio(grid.dense_times())
    lam_max = float(np.max(coeffs.nu * np.maximum(1.0, 1.0 - m)))
    return max(1, int(poisson.isf(tail_eps, lam_max * grid.T)) + 1)


def _count_values(H_of_N: CountFunction, n: np.ndarray) -> np.ndarray:
    func = H_of_N.of_count if isinstance(H_of_N, Liability) else H_of_N
    values = np.broadcast_to(np.asarray(func(n), dtype=float), n.shape).astype(float)
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > MAX_ABS_LIABILITY:
        raise ConfigurationError("liability is unbounded over the lattice range",
                                 key="liability")
    return values


def lattice_backward_induction(
    coeffs: MarketCoefficients,
    delta: float,
    H_of_N: CountFunction,
    grid: TimeGrid,
    tail_eps: float = DEFAULT_TAIL_EPS,
) -> BsdeSolution:
    """
    Backward induction on the Poisson lattice.

    Y_i(n) = sum_k p_k Y_{i+1}(n + k) + dt f_i(0, Psi_i(n)) with
    Psi_i(n) = Y_{i+1}(n + 1) - Y_{i+1}(n) and Z = 0; states above n_max are
    absorbed at n_max.

    Args:
        coeffs: Pure-jump coefficients
        delta: Risk aversion
        H_of_N: Liability or function of the terminal count
        grid: Time grid
        tail_eps: Poisson tail bound for the lattice and step kernels

    Returns:
        BsdeSolution with lattice representation and the explicit strategy per state

    Raises:
        ConfigurationError: If H is unbounded over the lattice
    """
    _check_pure_jump(coeffs, grid)
    if not tail_eps > 0:
        raise ConfigurationError("tail_eps must be positive", key="solver.tail_eps")
    M, dt = grid.M, grid.dt
    times = grid.times
    n_max = lattice_size(coeffs, grid, tail_eps)
    states = np.arange(n_max + 1)
    weights, lumped = poisson_step_kernel(coeffs.nu * dt, tail_eps)
    k_max = weights.size - 1
    gather = np.minimum(states[:, None] + np.arange(k_max + 1)[None, :], n_max)
    up = np.minimum(states + 1, n_max)

    Y = np.empty((M + 1, n_max + 1))
    Psi = np.empty((M, n_max + 1))
    pi = np.empty((M, n_max + 1))
    Y[M] = _count_values(H_of_N, states)
    mu, _, eta = coeffs.at(times[:-1])

    for i in range(M - 1, -1, -1):
        nxt = Y[i + 1]
        Psi[i] = nxt[up] - nxt
        drift = np.asarray(exponential_driver(0.0, Psi[i], mu[i], eta[i], coeffs.nu, delta))
        Y[i] = nxt[gather] @ weights + dt * drift
        pi[i] = exponential_pure_jump_strategy(Psi[i], mu[i], eta[i], coeffs.nu, delta,
                                               coeffs.eta_min)

    metadata: Dict[str, Any] = {
        "n_max": int(n_max),
        "k_max": int(k_max),
        "tail_eps": tail_eps,
        "step_tail_mass_lumped": lumped,
        "delta": delta,
    }
    logger.info(f"Lattice induction: M={M}, n_max={n_max}, k_max={k_max}, Y_0={Y[0, 0]:.10g}")
    return BsdeSolution(
        times=times, Y=Y, Z=np.zeros((M, n_max + 1)), Psi=Psi, H=Y[M].copy(),
        representation="lattice", scheme="poisson_lattice", pi=pi, metadata=metadata)


def linear_poisson_oracle(
    coeffs: MarketCoefficients,
    delta: float,
    H_of_N: CountFunction,
    grid: TimeGrid,
    tail_eps: float = DEFAULT_TAIL_EPS,
) -> float:
    """
    Exact continuous-time Y_0 for H = H(N_T).

    With Z = 0 the driver is affine in Psi, so Y_0 is the expectation of
    H(N_T) under jump intensity nu (1 - m(t)) plus (1/delta) int a.
    """
    _check_pure_jump(coeffs, grid)
    t = grid.dense_times()
    m = coeffs.jump_ratio(t)
    mu, _, eta = coeffs.at(t)
    shifted = float(simpson(coeffs.nu * (1.0 - m), x=t))
    drift = float(simpson(np.asarray(canonical_a(mu, eta, coeffs.nu)), x=t)) / delta
    k_top = max(1, int(poisson.isf(tail_eps, shifted)) + 1)
    k = np.arange(k_top + 1)
    return float(_count_values(H_of_N, k) @ poisson.pmf(k, shifted)) + drift


def check_driver_bounds(
    mu: float, eta: float, nu: float, delta: float, z_grid: np.ndarray, psi_grid: np.ndarray
) -> DriverBoundReport:
    """
    Check the growth and monotonicity conditions of the exponential driver on grids.

    Growth: -lam - dz^2/2 - [-psi]_d <= f(z, psi) <= lam + dz^2/2 + [psi]_d with
            lam = 2 (nu/delta)(1-m)|ln(1-m)|.
    Monotonicity: (psi - psi')(zeta + mu/(eta nu)) >= 0 with zeta = -mu/(eta nu).

    Raises:
        DomainError: If m >= 1
    """
    m = float(_ratio(mu, eta, nu))
    log_gap = float(np.log1p(-m))
    psi_star = log_gap / delta
    lam = 2.0 * nu / delta * (1.0 - m) * abs(log_gap)
    zeta = -m

    z, psi = np.meshgrid(np.asarray(z_grid, dtype=float), np.asarray(psi_grid, dtype=float),
                         indexing="ij")
    f = np.asarray(exponential_driver(z, psi, mu, eta, nu, delta))
    quad = 0.5 * delta * z**2
    upper = lam + quad + np.asarray(bracket_delta(psi, nu, delta))
    lower = -lam - quad - np.asarray(bracket_delta(-psi, nu, delta))
    growth = float(max(0.0, np.max(f - upper), np.max(lower - f)))

    psi_1d = np.asarray(psi_grid, dtype=float)
    diff = psi_1d[:, None] - psi_1d[None, :]
    monotonicity = float(max(0.0, np.max(-(diff * (zeta + mu / (eta * nu))))))

    peak_f = np.asarray(exponential_driver(0.0, psi_star, mu, eta, nu, delta))
    peak = float(peak_f - np.asarray(bracket_delta(psi_star, nu, delta)))
    if peak > lam:
        logger.warning(f"Driver peak {peak:.6g} exceeds lambda {lam:.6g} (m={m:.4g})")
    return DriverBoundReport(
        lam=lam, psi_star=psi_star, zeta=zeta, D1=min(0.0, zeta), D2=max(0.0, zeta),
        envelope_at_psi_star=2.0 * nu / delta * (1.0 - m) * log_gap, peak=peak,
        growth_violation=growth, monotonicity_violation=monotonicity)
