"""
Vectorized bracketed root finding for strictly decreasing functions.

Every element of ``lo``/``hi`` is an independent bracket; the routines run
them in lock-step with ``np.where`` masks.
"""

import logging
from typing import Callable, Tuple

import numpy as np

from ..core.exceptions import NumericalRangeError

logger = logging.getLogger(__name__)

ArrayFunc = Callable[[np.ndarray], np.ndarray]

MAX_BISECTIONS = 400


def bisect_decreasing(
    func: ArrayFunc,
    lo: np.ndarray,
    hi: np.ndarray,
    ftol: float = 0.0,
    max_iter: int = MAX_BISECTIONS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Shrink brackets [lo, hi] with func(lo) >= 0 >= func(hi) around the root.

    Iterates until each bracket is down to adjacent floating point numbers,
    or the residual at the midpoint is within ``ftol``.

    Args:
        func: Vectorized strictly decreasing function
        lo: Lower bracket ends
        hi: Upper bracket ends
        ftol: Absolute residual at which a bracket is considered solved
        max_iter: Safety cap on the number of halvings

    Returns:
        Tuple (lo, hi) of final brackets

    Raises:
        NumericalRangeError: If func is non-finite inside a bracket
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    active = hi > lo

    for _ in range(max_iter):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        bad = active & ~np.isfinite(f_mid)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise NumericalRangeError(
                f"non-finite residual inside bracket [{lo.flat[k]!r}, {hi.flat[k]!r}]"
            )
        # a midpoint equal to an end means the bracket is at machine resolution
        stalled = (mid == lo) | (mid == hi)
        solved = active & (np.abs(f_mid) <= ftol)
        lo = np.where(solved, mid, lo)
        hi = np.where(solved, mid, hi)
        active &= ~solved

        root_left = f_mid < 0
        hi = np.where(active & root_left, mid, hi)
        lo = np.where(active & ~root_left, mid, lo)
        active &= ~stalled
    return lo, hi


def at_resolution(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """True where no floating point number lies strictly between lo and hi."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.nextafter(lo, np.inf) >= hi


def secant_polish(func: ArrayFunc, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    One secant step across each bracket; keep whichever candidate has the smaller residual.
    """
    f_lo = func(lo)
    f_hi = func(hi)
    denom = f_lo - f_hi
    with np.errstate(divide="ignore", invalid="ignore"):
        x_sec = np.where(denom != 0, lo + f_lo * (hi - lo) / denom, 0.5 * (lo + hi))
    x_sec = np.clip(x_sec, lo, hi)
    f_sec = func(x_sec)

    best = np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)
    f_best = np.minimum(np.abs(f_lo), np.abs(f_hi))
    return np.where(np.abs(f_sec) < f_best, x_sec, best)


def expand_bracket(
    func: ArrayFunc, center: np.ndarray, step: float = 1.0, max_doublings: int = 200
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Grow [lo, hi] around ``center`` until func(lo) >= 0 >= func(hi).

    Raises:
        NumericalRangeError: If no sign change is found
    """
    center = np.asarray(center, dtype=float)
    lo = center.copy()
    hi = center.copy()
    width = np.full_like(center, step)
    for _ in range(max_doublings):
        need_lo = ~(func(lo) >= 0)
        need_hi = ~(func(hi) <= 0)
        if not (need_lo.any() or need_hi.any()):
            return lo, hi
        lo = np.where(need_lo, lo - width, lo)
        hi = np.where(need_hi, hi + width, hi)
        width = width * 2.0
    raise NumericalRangeError("could not bracket root by expansion")
