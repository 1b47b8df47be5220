"""
Utility functions on the whole real line.

Two families are provided: the exponential utility U(x) = -exp(-delta x)
and positive mixtures U(x) = -sum_j w_j exp(-delta_j x). Mixture
derivatives are evaluated in log space with ``logsumexp``; the inverse of
the marginal utility is found by bisection because it has no closed form.

Array methods return ``inf`` on overflow so Monte Carlo callers can flag
and exclude paths; the scalar ``evaluate`` raises instead.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from ..core.exceptions import ConfigurationError, DomainError, NumericalRangeError
from ..utils.roots import bisect_decreasing, expand_bracket, secant_polish

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class UtilityValues:
    """U and its first three derivatives, plus absolute risk aversion, at one point."""
    u: float
    du: float
    d2u: float
    d3u: float
    ara: float

    def to_dict(self) -> Dict[str, float]:
        """Convert to dictionary for serialization."""
        return asdict(self)


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


class UtilityFunction(ABC):
    """
    Base class for utilities satisfying U' > 0, U'' < 0 and ARA >= k > 0.

    Subclasses implement the log marginal utility and its inverse; the
    remaining derivatives follow from them.
    """

    family: str = ""

    @property
    @abstractmethod
    def k(self) -> float:
        """Declared lower bound of the absolute risk aversion."""

    @abstractmethod
    def log_du(self, x: ArrayLike) -> ArrayLike:
        """Natural log of U'(x)."""

    @abstractmethod
    def inv_du_log(self, log_m: ArrayLike) -> ArrayLike:
        """Solve log U'(x) = log_m for x."""

    @abstractmethod
    def u(self, x: ArrayLike) -> ArrayLike:
        """Utility value."""

    @abstractmethod
    def d2u(self, x: ArrayLike) -> ArrayLike:
        """Second derivative."""

    @abstractmethod
    def d3u(self, x: ArrayLike) -> ArrayLike:
        """Third derivative."""

    @abstractmethod
    def ara(self, x: ArrayLike) -> ArrayLike:
        """Absolute risk aversion -U''/U'."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Config-style description of the utility."""

    def du(self, x: ArrayLike) -> ArrayLike:
        """Marginal utility U'(x)."""
        with np.errstate(over="ignore"):
            return _unwrap(np.exp(self.log_du(x)))

    def inv_du(self, m: ArrayLike) -> ArrayLike:
        """
        Invert the marginal utility.

        Args:
            m: Positive marginal utility level(s)

        Returns:
            x with U'(x) = m

        Raises:
            DomainError: If any m <= 0
        """
        m_arr = np.asarray(m, dtype=float)
        if np.any(~(m_arr > 0)):
            raise DomainError(f"marginal utility must be positive for inversion, got {m!r}")
        return self.inv_du_log(np.log(m_arr))

    def evaluate(self, x: float) -> UtilityValues:
        """
        Evaluate (u, du, d2u, d3u, ara) at a finite scalar point.

        Raises:
            DomainError: If x is not finite
            NumericalRangeError: If any value overflows
        """
        if not math.isfinite(x):
            raise DomainError(f"utility argument must be finite, got {x!r}")
        with np.errstate(over="ignore"):
            values = UtilityValues(
                u=float(self.u(x)),
                du=float(self.du(x)),
                d2u=float(self.d2u(x)),
                d3u=float(self.d3u(x)),
                ara=float(self.ara(x)),
            )
        if not all(math.isfinite(v) for v in asdict(values).values()):
            raise NumericalRangeError(f"{self.family} utility overflows at x={x!r}")
        return values


class ExponentialUtility(UtilityFunction):
    """
    Exponential utility U(x) = -exp(-delta x).

    Args:
        delta: Risk aversion parameter, strictly positive
    """

    family = "exponential"

    def __init__(self, delta: float):
        if not (delta > 0 and math.isfinite(delta)):
            raise ConfigurationError(f"risk aversion must be positive, got {delta!r}",
                                     key="utility.delta")
        self.delta = float(delta)
        self._log_delta = math.log(self.delta)

    def __repr__(self) -> str:
        return f"ExponentialUtility(delta={self.delta})"

    @property
    def k(self) -> float:
        return self.delta

    def _expo(self, x: ArrayLike) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-self.delta * np.asarray(x, dtype=float))

    def u(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(-self._expo(x))

    def log_du(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(self._log_delta - self.delta * np.asarray(x, dtype=float))

    def d2u(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(-self.delta**2 * self._expo(x))

    def d3u(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(self.delta**3 * self._expo(x))

    def ara(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(np.full(np.shape(x), self.delta))

    def inv_du_log(self, log_m: ArrayLike) -> ArrayLike:
        return _unwrap(-(np.asarray(log_m, dtype=float) - self._log_delta) / self.delta)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "delta": self.delta}


class ExponentialMixtureUtility(UtilityFunction):
    """
    Mixture U(x) = -sum_j w_j exp(-delta_j x) with w_j, delta_j > 0.

    ARA is a U'-weighted average of the rates, so it is bounded below by
    min_j delta_j.

    Args:
        weights: Positive mixture weights
        rates: Positive exponential rates, same length as weights
    """

    family = "exponential_mixture"

    def __init__(self, weights: Sequence[float], rates: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        d = np.asarray(rates, dtype=float)
        if w.ndim != 1 or w.size == 0 or w.shape != d.shape:
            raise ConfigurationError("weights and rates must be non-empty and of equal length",
                                     key="utility.weights")
        if np.any(~(w > 0)) or np.any(~np.isfinite(w)):
            raise ConfigurationError("all weights must be positive", key="utility.weights")
        if np.any(~(d > 0)) or np.any(~np.isfinite(d)):
            raise ConfigurationError("all rates must be positive", key="utility.rates")
        self.weights = w
        self.rates = d
        self._log_w = np.log(w)
        self._log_d = np.log(d)
        self._log_du0 = float(logsumexp(self._log_w + self._log_d))

    def __repr__(self) -> str:
        return (f"ExponentialMixtureUtility(weights={self.weights.tolist()}, "
                f"rates={self.rates.tolist()})")

    @property
    def k(self) -> float:
        return float(self.rates.min())

    def _log_moment(self, x: ArrayLike, power: int) -> np.ndarray:
        """log sum_j w_j delta_j^power exp(-delta_j x), broadcast over x."""
        x_arr = np.asarray(x, dtype=float)[..., np.newaxis]
        terms = self._log_w + power * self._log_d - self.rates * x_arr
        return logsumexp(terms, axis=-1)

    def u(self, x: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return _unwrap(-np.exp(self._log_moment(x, 0)))

    def log_du(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(self._log_moment(x, 1))

    def d2u(self, x: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return _unwrap(-np.exp(self._log_moment(x, 2)))

    def d3u(self, x: ArrayLike) -> ArrayLike:
        with np.errstate(over="ignore"):
            return _unwrap(np.exp(self._log_moment(x, 3)))

    def ara(self, x: ArrayLike) -> ArrayLike:
        return _unwrap(np.exp(self._log_moment(x, 2) - self._log_moment(x, 1)))

    def inv_du_log(self, log_m: ArrayLike) -> ArrayLike:
        target = np.asarray(log_m, dtype=float)
        if np.any(~np.isfinite(target)):
            raise NumericalRangeError("log marginal utility must be finite for inversion")
        flat = target.reshape(-1)

        def gap(x: np.ndarray) -> np.ndarray:
            return self._log_moment(x, 1) - flat

        seed = -(flat - self._log_du0) / self.rates.max()
        lo, hi = expand_bracket(gap, seed, step=1.0)
        lo, hi = bisect_decreasing(gap, lo, hi)
        root = secant_polish(gap, lo, hi)
        return _unwrap(root.reshape(target.shape))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "weights": self.weights.tolist(),
            "rates": self.rates.tolist(),
        }


def build_utility(spec: Dict[str, Any]) -> UtilityFunction:
    """
    Build a utility from its config block.

    Args:
        spec: Dictionary with ``family`` and the family's parameters

    Returns:
        Utility instance

    Raises:
        ConfigurationError: If the family is unknown or parameters are invalid
    """
    family = spec.get("family", "exponential")
    if family == "exponential":
        return ExponentialUtility(spec.get("delta", 1.0))
    if family == "exponential_mixture":
        return ExponentialMixtureUtility(spec.get("weights", []), spec.get("rates", []))
    raise ConfigurationError(f"unknown utility family {family!r}", key="utility.family")


def invert_marginal(U: UtilityFunction, m: ArrayLike) -> ArrayLike:
    """(U')^{-1}(m), raising DomainError for m <= 0."""
    return U.inv_du(m)
