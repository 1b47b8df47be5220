"""
Portfolio strategies.

A strategy gives the amount invested in the risky asset over step i. It is
evaluated at the left grid point t_i from the state (X_i, N_i, W_i) only,
so it can never see the increments of its own step.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from ..core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

FeedbackFunc = Callable[[int, float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class Strategy(ABC):
    """
    Predictable strategy pi_i = pi(t_i, X_i, N_i, W_i).

    Attributes:
        label: Name used in reports and CSV output
        bound: Declared bound on |pi|, checked when used as a perturbation direction
    """

    label: str = "strategy"
    bound: Optional[float] = None

    @abstractmethod
    def evaluate(
        self, step: int, t: float, x: np.ndarray, n: np.ndarray, w: np.ndarray
    ) -> np.ndarray:
        """
        Amount invested over step ``step`` for every path.

        Args:
            step: Grid step index i
            t: Left grid point t_i
            x: Wealth X_i per path
            n: Jump count N_i per path
            w: Brownian level W_i per path

        Returns:
            Array broadcastable to the number of paths
        """

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label!r})"


class ConstantStrategy(Strategy):
    """Invest a fixed amount at every step."""

    def __init__(self, value: float, label: Optional[str] = None):
        self.value = float(value)
        self.label = label or f"constant({self.value:g})"
        self.bound = abs(self.value)

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), self.value)


class StepStrategy(Strategy):
    """``value`` while t_i <= t_switch, zero afterwards."""

    def __init__(self, value: float, t_switch: float, label: Optional[str] = None):
        self.value = float(value)
        self.t_switch = float(t_switch)
        self.label = label or f"step({self.value:g}, t<={self.t_switch:g})"
        self.bound = abs(self.value)

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        level = self.value if t <= self.t_switch else 0.0
        return np.full(np.shape(x), level)


class DeterministicStrategy(Strategy):
    """Time-only strategy given as one value per grid step."""

    def __init__(self, values: np.ndarray, label: str = "deterministic"):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 1:
            raise ConfigurationError("deterministic strategy needs one value per step")
        self.label = label
        self.bound = float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), self.values[step])


class TableStrategy(Strategy):
    """
    Path-by-step table, e.g. a solver output on the bundle it was computed on.

    Only valid with a bundle whose path count equals the table's row count.
    """

    def __init__(self, table: np.ndarray, label: str = "table"):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ConfigurationError("table strategy needs a (paths, steps) array")
        self.label = label
        self.bound = float(np.max(np.abs(self.table))) if self.table.size else 0.0

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        if np.shape(x)[0] != self.table.shape[0]:
            raise ConfigurationError(
                f"table strategy has {self.table.shape[0]} rows, bundle has {np.shape(x)[0]} paths")
        return self.table[:, step]


class LatticeStrategy(Strategy):
    """Strategy indexed by (step, jump count); counts above the table are held at its top row."""

    def __init__(self, table: np.ndarray, label: str = "lattice"):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ConfigurationError("lattice strategy needs a (steps, states) array")
        self.label = label
        self.bound = float(np.max(np.abs(self.table))) if self.table.size else 0.0

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        idx = np.minimum(np.asarray(n, dtype=np.int64), self.table.shape[1] - 1)
        return self.table[step, idx]


class FeedbackStrategy(Strategy):
    """Arbitrary state-feedback rule given as a callable."""

    def __init__(self, func: FeedbackFunc, label: str = "feedback", bound: Optional[float] = None):
        self.func = func
        self.label = label
        self.bound = bound

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        return self.func(step, t, x, n, w)


class PerturbedStrategy(Strategy):
    """base + epsilon * direction."""

    def __init__(self, base: Strategy, direction: Strategy, epsilon: float,
                 label: Optional[str] = None):
        self.base = base
        self.direction = direction
        self.epsilon = float(epsilon)
        self.label = label or f"{base.label}{self.epsilon:+g}*{direction.label}"
        if base.bound is not None and direction.bound is not None:
            self.bound = base.bound + abs(self.epsilon) * direction.bound

    def evaluate(self, step: int, t: float, x: np.ndarray, n: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
        return (self.base.evaluate(step, t, x, n, w)
                + self.epsilon * self.direction.evaluate(step, t, x, n, w))
