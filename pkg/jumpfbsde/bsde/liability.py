"""
Terminal liabilities H.

H is a bounded function of the terminal jump count and, for the coupled
solver only, the terminal Brownian level. A count table lists H(0), H(1),
...; counts past the end of the table take its last entry.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from ..core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAX_ABS_LIABILITY = 1e12


class Liability(ABC):
    """Terminal condition H."""

    kind: str = ""
    depends_on_brownian: bool = False

    @abstractmethod
    def of_count(self, n: np.ndarray) -> np.ndarray:
        """H as a function of N_T (only for liabilities that do not use W_T)."""

    def terminal(self, n_T: np.ndarray, w_T: np.ndarray) -> np.ndarray:
        """H per path from (N_T, W_T)."""
        return self.of_count(n_T)

    @property
    def constant_value(self) -> Optional[float]:
        """The constant if H is constant, otherwise None."""
        return None

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Config-style description."""


class ZeroLiability(Liability):
    """H = 0, the pure investment problem."""

    kind = "zero"

    def of_count(self, n: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(n))

    @property
    def constant_value(self) -> Optional[float]:
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind}


class ConstantLiability(Liability):
    """H = value."""

    kind = "constant"

    def __init__(self, value: float):
        value = float(value)
        if not (np.isfinite(value) and abs(value) <= MAX_ABS_LIABILITY):
            raise ConfigurationError(f"liability must be finite and bounded, got {value!r}",
                                     key="liability.value")
        self.value = value

    def of_count(self, n: np.ndarray) -> np.ndarray:
        return np.full(np.shape(n), self.value)

    @property
    def constant_value(self) -> Optional[float]:
        return self.value

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "value": self.value}


class CountTableLiability(Liability):
    """H(N_T) from an explicit table n -> value."""

    kind = "table"

    def __init__(self, table: Sequence[float]):
        values = np.asarray(table, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ConfigurationError("liability table must be a non-empty list",
                                     key="liability.table")
        if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > MAX_ABS_LIABILITY:
            raise ConfigurationError("liability table must be finite and bounded",
                                     key="liability.table")
        self.table = values

    def of_count(self, n: np.ndarray) -> np.ndarray:
        idx = np.minimum(np.asarray(n, dtype=np.int64), self.table.size - 1)
        return self.table[idx]

    @property
    def constant_value(self) -> Optional[float]:
        if np.all(self.table == self.table[0]):
            return float(self.table[0])
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "table": self.table.tolist()}


class FunctionalLiability(Liability):
    """
    H = func(N_T, W_T) for programmatic use with the coupled solver.

    Args:
        func: Vectorized function of (N_T, W_T), must be bounded
        bound: Declared bound on |H|, checked on evaluation
    """

    kind = "functional"

    def __init__(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray], bound: float,
                 depends_on_brownian: bool = True, label: str = "functional"):
        self.func = func
        self.bound = float(bound)
        self.depends_on_brownian = depends_on_brownian
        self.label = label

    def of_count(self, n: np.ndarray) -> np.ndarray:
        if self.depends_on_brownian:
            raise ConfigurationError(f"liability {self.label!r} depends on W_T, not on N_T alone")
        return self.terminal(n, np.zeros(np.shape(n)))

    def terminal(self, n_T: np.ndarray, w_T: np.ndarray) -> np.ndarray:
        values = np.asarray(self.func(n_T, w_T), dtype=float)
        if not np.all(np.isfinite(values)) or np.max(np.abs(values), initial=0.0) > self.bound:
            raise ConfigurationError(f"liability {self.label!r} exceeds its bound {self.bound}")
        return np.broadcast_to(values, np.shape(n_T)).astype(float)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label, "bound": self.bound}


def build_liability(spec: Dict[str, Any]) -> Liability:
    """
    Build a liability from its config block.

    Raises:
        ConfigurationError: If the kind is unknown
    """
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return ZeroLiability()
    if kind == "constant":
        return ConstantLiability(spec.get("value", 0.0))
    if kind == "table":
        return CountTableLiability(spec.get("table") or [])
    raise ConfigurationError(f"unknown liability kind {kind!r}", key="liability.kind")
