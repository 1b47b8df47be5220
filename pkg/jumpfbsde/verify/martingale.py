"""Martingale diagnostics and path-wise stochastic exponentials."""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..core.data_structures import MartingaleReport
from ..core.exceptions import ConfigurationError, DomainError
from ..market.simulation import PathBundle

logger = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = 10


def checkpoint_indices(M: int, count: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """Grid indices 0 = i_0 < ... <= M spaced evenly, ``count`` of them after t = 0."""
    return np.unique(np.rint(np.linspace(0, M, count + 1)).astype(int))


def martingale_diagnostic(
    values: np.ndarray, checkpoints: Optional[Sequence[int]] = None, label: str = ""
) -> MartingaleReport:
    """
    Check that the mean of a process stays at its initial mean.

    Args:
        values: Per-path values at the checkpoints, shape (n_paths, n_checkpoints)
        checkpoints: Grid indices of the columns (0, 1, ... when omitted)
        label: Name in the report

    Returns:
        MartingaleReport with the largest |mean_t - mean_0| / SE_t

    Raises:
        ConfigurationError: If there are no checkpoints
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] == 0:
        raise ConfigurationError("martingale diagnostic needs at least one checkpoint",
                                 key="verify.checkpoints")
    if checkpoints is None:
        checkpoints = list(range(values.shape[1]))
    if len(checkpoints) != values.shape[1]:
        raise ConfigurationError("checkpoint count does not match the value columns",
                                 key="verify.checkpoints")
    rows = np.all(np.isfinite(values), axis=1)
    if not rows.all():
        logger.warning(f"{label or 'martingale'}: excluding {int((~rows).sum())} non-finite paths")
    kept = values[rows]
    n = kept.shape[0]
    means = kept.mean(axis=0)
    ses = kept.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(values.shape[1])
    reference = float(means[0])
    gaps = np.abs(means - reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(ses > 0, gaps / np.where(ses > 0, ses, 1.0),
                          np.where(gaps > 0, np.inf, 0.0))
    return MartingaleReport(
        checkpoints=[int(c) for c in checkpoints], means=[float(v) for v in means],
        std_errors=[float(v) for v in ses], reference=reference,
        max_deviation=float(np.max(scores)), n_paths=int(n), label=label)


def doleans_exponential(
    paths: PathBundle,
    theta_n: Union[float, np.ndarray],
    theta_w: Union[float, np.ndarray] = 0.0,
) -> np.ndarray:
    """
    Stochastic exponential of int theta_w dW + int theta_n dn along every path.

    Accumulated in log space: theta_w dW - theta_w^2 dt / 2 between grid
    points, dN ln(1 + theta_n) at the jumps and -theta_n nu dt for the
    compensator.

    Args:
        paths: Driver increments
        theta_n: Jump integrand per step (scalar or length M), > -1
        theta_w: Brownian integrand per step (scalar or length M)

    Returns:
        Values at grid points, shape (n_paths, M + 1), starting at 1

    Raises:
        DomainError: If theta_n <= -1
    """
    grid = paths.grid
    M, dt = grid.M, grid.dt
    tn = np.broadcast_to(np.asarray(theta_n, dtype=float), (M,))
    tw = np.broadcast_to(np.asarray(theta_w, dtype=float), (M,))
    if np.any(tn <= -1):
        raise DomainError("stochastic exponential needs jump integrand > -1")
    increments = (tw * paths.dW - 0.5 * tw**2 * dt
                  + paths.dN * np.log1p(tn) - tn * paths.nu * dt)
    log_values = np.zeros((paths.n_paths, M + 1))
    np.cumsum(increments, axis=1, out=log_values[:, 1:])
    return np.exp(log_values)
