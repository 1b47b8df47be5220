"""
Market coefficients and the simulation time grid.

The return increment over a step is mu dt + sigma dW + eta dn, where
n = N - nu t is the compensated Poisson process. Coefficients are
deterministic functions of time; bound checks run on a dense sample grid
(10 points per simulation step) and are a sampling check, not a proof.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..core.exceptions import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

MODES = ("diffusive", "pure_jump")
ETA_FLOOR = -1.0 + 1e-6
DENSE_FACTOR = 10


@dataclass(frozen=True)
class TimeGrid:
    """
    Uniform grid t_i = i T / M on [0, T].

    Attributes:
        T: Horizon
        M: Number of steps
    """
    T: float
    M: int

    def __post_init__(self) -> None:
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError(f"horizon must be positive, got {self.T!r}", key="grid.T")
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 1:
            raise ConfigurationError(f"step count must be a positive integer, got {self.M!r}",
                                     key="grid.M")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        """Grid points t_0 = 0, ..., t_M = T."""
        return np.linspace(0.0, self.T, int(self.M) + 1)

    def dense_times(self, factor: int = DENSE_FACTOR) -> np.ndarray:
        """Sample grid used for coefficient bound checks."""
        return np.linspace(0.0, self.T, factor * int(self.M) + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"T": self.T, "M": int(self.M)}


@dataclass(frozen=True)
class CoefficientFunction:
    """
    Deterministic function of time.

    Kinds:
        constant:  value
        linear:    value + slope * t
        sine:      value + amplitude * sin(2 pi frequency t + phase)
        piecewise: values[j] on [breakpoints[j-1], breakpoints[j]), right-continuous
    """
    kind: str = "constant"
    value: float = 0.0
    slope: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0
    breakpoints: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "linear", "sine", "piecewise"):
            raise ConfigurationError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "piecewise":
            if len(self.values) != len(self.breakpoints) + 1:
                raise ConfigurationError("piecewise coefficient needs len(values) == "
                                         "len(breakpoints) + 1")
            if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
                raise ConfigurationError("piecewise breakpoints must be increasing")

    def __call__(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t_arr.shape, float(self.value))
        if self.kind == "linear":
            return self.value + self.slope * t_arr
        if self.kind == "sine":
            return self.value + self.amplitude * np.sin(
                2.0 * np.pi * self.frequency * t_arr + self.phase)
        idx = np.searchsorted(np.asarray(self.breakpoints, dtype=float), t_arr, side="right")
        return np.asarray(self.values, dtype=float)[idx]

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "linear":
            return self.slope == 0.0
        if self.kind == "sine":
            return self.amplitude == 0.0
        return len(set(self.values)) == 1

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "linear":
            return {"kind": "linear", "value": self.value, "slope": self.slope}
        if self.kind == "sine":
            return {"kind": "sine", "value": self.value, "amplitude": self.amplitude,
                    "frequency": self.frequency, "phase": self.phase}
        return {"kind": "piecewise", "breakpoints": list(self.breakpoints),
                "values": list(self.values)}

    @classmethod
    def from_spec(cls, spec: Union[float, int, Dict[str, Any]], key: str) -> "CoefficientFunction":
        """
        Build from a number (constant) or a dictionary with a ``kind``.

        Raises:
            ConfigurationError: Naming ``key`` on any malformed entry
        """
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls(kind="constant", value=float(spec))
        if not isinstance(spec, dict):
            raise ConfigurationError(f"expected a number or an object, got {spec!r}", key=key)
        allowed = {"kind", "value", "slope", "amplitude", "frequency", "phase",
                   "breakpoints", "values"}
        unknown = sorted(set(spec) - allowed)
        if unknown:
            raise ConfigurationError(f"unknown key(s) {unknown}", key=key)
        data = dict(spec)
        data["breakpoints"] = tuple(float(b) for b in data.get("breakpoints", ()))
        data["values"] = tuple(float(v) for v in data.get("values", ()))
        try:
            return cls(**data)
        except ConfigurationError as e:
            raise ConfigurationError(str(e), key=key) from e
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid coefficient: {e}", key=key) from e


def _const(value: float) -> CoefficientFunction:
    return CoefficientFunction(kind="constant", value=float(value))


@dataclass(frozen=True)
class MarketCoefficients:
    """
    Market model for a single risky asset with a non-interest-bearing bank account.

    Attributes:
        mu: Drift per unit time
        sigma: Diffusion volatility, identically zero in pure_jump mode
        eta: Relative jump size of the price
        nu: Poisson intensity
        s0: Initial price (not materialized; wealth only needs returns)
        mode: ``diffusive`` or ``pure_jump``
        mu_bound, sigma_bound, eta_bound: Declared sup-norm bounds
        sigma_min: Lower volatility bound in diffusive mode
        eta_min: Lower bound on |eta| in pure_jump mode
        c1, c2: Declared bounds c1 <= mu/eta <= c2 < nu in pure_jump mode;
            when None they are taken from the sampled ratio
    """
    mu: CoefficientFunction = field(default_factory=lambda: _const(0.1))
    sigma: CoefficientFunction = field(default_factory=lambda: _const(0.0))
    eta: CoefficientFunction = field(default_factory=lambda: _const(0.5))
    nu: float = 1.0
    s0: float = 1.0
    mode: str = "pure_jump"
    mu_bound: float = 10.0
    sigma_bound: float = 10.0
    eta_bound: float = 10.0
    sigma_min: float = 1e-4
    eta_min: float = 1e-8
    c1: Optional[float] = None
    c2: Optional[float] = None

    @classmethod
    def constant(
        cls, mu: float, sigma: float, eta: float, nu: float, mode: Optional[str] = None,
        **kwargs: Any
    ) -> "MarketCoefficients":
        """Constant coefficients; the mode defaults to pure_jump when sigma is zero."""
        if mode is None:
            mode = "pure_jump" if sigma == 0 else "diffusive"
        return cls(mu=_const(mu), sigma=_const(sigma), eta=_const(eta), nu=float(nu),
                   mode=mode, **kwargs)

    def at(self, t: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (mu(t), sigma(t), eta(t))."""
        return self.mu(t), self.sigma(t), self.eta(t)

    @property
    def is_pure_jump(self) -> bool:
        return self.mode == "pure_jump"

    @property
    def is_time_homogeneous(self) -> bool:
        return self.mu.is_constant and self.sigma.is_constant and self.eta.is_constant

    def jump_ratio(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """
        Ratio m(t) = mu / (eta nu).

        Raises:
            DomainError: If eta or nu vanishes
        """
        mu, _, eta = self.at(t)
        if self.nu <= 0 or np.any(eta == 0):
            raise DomainError("jump ratio mu/(eta nu) needs eta != 0 and nu > 0")
        return mu / (eta * self.nu)

    def validate(self, grid: TimeGrid) -> bool:
        """
        Check coefficient invariants on a dense sample grid.

        Returns:
            True if all checks pass

        Raises:
            ConfigurationError: Naming the violated bound
        """
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}",
                                     key="market.mode")
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ConfigurationError("violated invariant nu >= 0", key="market.nu")
        if self.nu == 0:
            logger.warning("Zero jump intensity: Poisson increments are identically zero")
        if not self.s0 > 0:
            raise ConfigurationError("violated invariant s0 > 0", key="market.s0")

        t = grid.dense_times()
        mu, sigma, eta = self.at(t)
        for name, values, bound in (("mu", mu, self.mu_bound), ("sigma", sigma, self.sigma_bound),
                                    ("eta", eta, self.eta_bound)):
            if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > bound:
                raise ConfigurationError(f"violated bound |{name}(t)| <= {name}_bound = {bound}",
                                         key=f"market.{name}")
        if np.any(sigma < 0):
            raise ConfigurationError("violated invariant sigma(t) >= 0", key="market.sigma")
        if np.any(eta <= ETA_FLOOR):
            raise ConfigurationError("violated invariant eta(t) > -1 + 1e-6", key="market.eta")

        if self.mode == "diffusive":
            if not self.sigma_min > 0:
                raise ConfigurationError("violated invariant sigma_min > 0",
                                         key="market.sigma_min")
            if np.any(sigma**2 < self.sigma_min**2):
                raise ConfigurationError("violated invariant sigma(t)^2 >= sigma_min^2",
                                         key="market.sigma")
            return True

        if np.any(sigma != 0):
            raise ConfigurationError("violated invariant sigma == 0 in pure_jump mode",
                                     key="market.sigma")
        if np.any(np.abs(eta) < self.eta_min):
            raise ConfigurationError(f"violated invariant |eta(t)| >= eta_min = {self.eta_min}",
                                     key="market.eta")
        ratio = mu / eta
        c1 = float(ratio.min()) if self.c1 is None else self.c1
        c2 = float(ratio.max()) if self.c2 is None else self.c2
        if c1 > c2:
            raise ConfigurationError("violated invariant c1 <= c2", key="market.c1")
        if np.any(ratio < c1 - 1e-12):
            raise ConfigurationError("violated invariant c1 <= mu/eta", key="market.c1")
        if np.any(ratio > c2 + 1e-12):
            raise ConfigurationError("violated invariant mu/eta <= c2", key="market.c2")
        if not c2 < self.nu:
            raise ConfigurationError(f"violated invariant c2 < nu (c2={c2}, nu={self.nu})",
                                     key="market.c2")
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "mu": self.mu.to_dict(),
            "sigma": self.sigma.to_dict(),
            "eta": self.eta.to_dict(),
            "nu": self.nu,
            "s0": self.s0,
            "mu_bound": self.mu_bound,
            "sigma_bound": self.sigma_bound,
            "eta_bound": self.eta_bound,
            "sigma_min": self.sigma_min,
            "eta_min": self.eta_min,
            "c1": self.c1,
            "c2": self.c2,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MarketCoefficients":
        """Build from a ``market`` config block."""
        kwargs: Dict[str, Any] = {}
        for name in ("mu", "sigma", "eta"):
            if name in data:
                kwargs[name] = CoefficientFunction.from_spec(data[name], key=f"market.{name}")
        for name in ("nu", "s0", "mu_bound", "sigma_bound", "eta_bound", "sigma_min", "eta_min"):
            if name in data:
                kwargs[name] = float(data[name])
        for name in ("c1", "c2"):
            if data.get(name) is not None:
                kwargs[name] = float(data[name])
        if "mode" in data:
            kwargs["mode"] = data["mode"]
        return cls(**kwargs)
