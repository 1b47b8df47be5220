"""Deterministic time integrals on the simulation grid."""

import numpy as np
from scipy.integrate import simpson


def tail_integrals(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """
    Composite Simpson integrals of ``values`` from each grid point to the horizon.

    Args:
        values: Integrand sampled at ``times`` (length M + 1)
        times: Uniform grid t_0 < ... < t_M

    Returns:
        Array I with I[i] = integral from t_i to t_M; I[M] = 0
    """
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.zeros_like(times)
    last = len(times) - 1
    for i in range(last):
        out[i] = simpson(values[i:], x=times[i:])
    return out
