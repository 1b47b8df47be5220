"""Audit of the integrability hypotheses through testable consequences."""

import logging
from typing import Dict, List

import numpy as np

from ..core.data_structures import AuditReport
from ..utility.functions import UtilityFunction

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.05
DOUBLINGS = 2


def running_means(values: np.ndarray, sizes: List[int]) -> List[float]:
    """Means over the first ``s`` entries for each size s."""
    csum = np.cumsum(values)
    return [float(csum[s - 1] / s) for s in sizes]


def hypothesis_audit(
    U: UtilityFunction,
    terminal_wealth: np.ndarray,
    H: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
) -> AuditReport:
    """
    Audit (H1)-(H3) for one strategy output.

    H1 is read off the utility's declared risk-aversion bound. For H2 and
    H3, E[U'(X_T + H)^2] and E[|U(X_T + H)|] are estimated on nested
    samples n/4, n/2, n; an estimate that moves by more than ``tolerance``
    (relative) across a doubling, or is not finite, is a warning.

    Args:
        U: Utility
        terminal_wealth: X_T per path
        H: Liability per path (or scalar)
        tolerance: Relative stability tolerance

    Returns:
        AuditReport with status ``pass`` or ``warn``
    """
    xi = np.asarray(terminal_wealth, dtype=float) + np.asarray(H, dtype=float)
    n = xi.size
    sizes = sorted({max(1, n >> k) for k in range(DOUBLINGS, -1, -1)})
    with np.errstate(over="ignore", invalid="ignore"):
        samples = {
            "marginal_second_moment": np.asarray(U.du(xi), dtype=float) ** 2,
            "utility_abs_moment": np.abs(np.asarray(U.u(xi), dtype=float)),
        }

    moments: Dict[str, List[float]] = {}
    stable: Dict[str, bool] = {}
    for name, values in samples.items():
        estimates = running_means(values, sizes)
        moments[name] = estimates
        ok = all(np.isfinite(estimates))
        for prev, cur in zip(estimates, estimates[1:]):
            if not ok:
                break
            scale = max(abs(cur), np.finfo(float).tiny)
            ok = abs(cur - prev) / scale <= tolerance
        stable[name] = bool(ok)
        if not ok:
            logger.warning(f"Audit: {name} does not stabilize under sample doubling: {estimates}")

    h1 = U.k > 0
    status = "pass" if h1 and all(stable.values()) else "warn"
    return AuditReport(k=float(U.k), h1_passed=bool(h1), sample_sizes=sizes, moments=moments,
                       stable=stable, status=status, tolerance=tolerance)
