"""
Configuration settings for jumpfbsde experiments.

This module provides configuration management for the market, utility,
liability, grid, Monte Carlo, solver and verification blocks of one
experiment, plus logging setup.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from typing_extensions import Literal

from ..bsde.liability import Liability, build_liability
from ..bsde.picard import ESTIMATORS
from ..core.exceptions import ConfigurationError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..utility.functions import ExponentialUtility, UtilityFunction, build_utility
from ..verify.suite import CHECKS

logger = logging.getLogger(__name__)

TIERS = ("ode", "lattice", "picard")
Tier = Literal["ode", "lattice", "picard"]
Estimator = Literal["increment", "differencing"]
CoefficientSpec = Union[float, Dict[str, Any]]


@dataclass
class MarketConfig:
    """Market block: coefficient specs (number or {kind: ...}), intensity and bounds."""
    mode: str = "pure_jump"
    mu: CoefficientSpec = 0.1
    sigma: CoefficientSpec = 0.0
    eta: CoefficientSpec = 0.5
    nu: float = 1.0
    s0: float = 1.0
    mu_bound: float = 10.0
    sigma_bound: float = 10.0
    eta_bound: float = 10.0
    sigma_min: float = 1e-4
    eta_min: float = 1e-8
    c1: Optional[float] = None
    c2: Optional[float] = None

    def build(self) -> MarketCoefficients:
        return MarketCoefficients.from_dict(asdict(self))


@dataclass
class UtilityConfig:
    """Utility block: ``exponential`` (delta) or ``exponential_mixture`` (weights, rates)."""
    family: str = "exponential"
    delta: float = 1.0
    weights: List[float] = field(default_factory=list)
    rates: List[float] = field(default_factory=list)

    def build(self) -> UtilityFunction:
        return build_utility(asdict(self))


@dataclass
class LiabilityConfig:
    """Liability block: ``zero``, ``constant`` (value) or ``table`` (H(n) for n = 0, 1, ...)."""
    kind: str = "zero"
    value: float = 0.0
    table: List[float] = field(default_factory=list)

    def build(self) -> Liability:
        return build_liability(asdict(self))


@dataclass
class GridConfig:
    """Time grid block."""
    T: float = 1.0
    M: int = 100

    def build(self) -> TimeGrid:
        return TimeGrid(T=self.T, M=self.M)


@dataclass
class MonteCarloConfig:
    """Monte Carlo block."""
    n_paths: int = 100_000
    seed: int = 7
    threads: int = 1
    x0: float = 0.0
    dump_paths: int = 100


@dataclass
class SolverConfig:
    """Backward-equation solver block."""
    tier: Tier = "ode"
    tol: float = 1e-12
    tail_eps: float = 1e-12
    regression_degree: int = 3
    n_iter: int = 10
    damping: float = 1.0
    estimator: Estimator = "increment"
    picard_paths: int = 50_000


@dataclass
class VerifyConfig:
    """Verification block: checks to run and the band multiplier in standard errors."""
    checks: List[str] = field(default_factory=lambda: list(CHECKS))
    band: float = 3.0


@dataclass
class LoggingConfig:
    """Configuration for logging settings."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None
    max_file_size: int = 10_000_000  # 10MB
    backup_count: int = 5


BLOCKS = {
    "market": MarketConfig,
    "utility": UtilityConfig,
    "liability": LiabilityConfig,
    "grid": GridConfig,
    "mc": MonteCarloConfig,
    "solver": SolverConfig,
    "verify": VerifyConfig,
    "logging": LoggingConfig,
}


def _block_from_dict(name: str, data: Any) -> Any:
    cls = BLOCKS[name]
    if not isinstance(data, dict):
        raise ConfigurationError(f"expected an object, got {type(data).__name__}", key=name)
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigurationError("unknown key", key=f"{name}.{key}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigurationError(f"invalid block: {e}", key=name) from e


@dataclass
class ExperimentConfig:
    """Main configuration class for one experiment."""
    market: MarketConfig = field(default_factory=MarketConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    liability: LiabilityConfig = field(default_factory=LiabilityConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    # Output settings
    output_dir: str = "output"

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Create configuration from dictionary.

        Raises:
            ConfigurationError: On unknown keys, naming the dotted path
        """
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a JSON object")
        config = cls()
        for key, value in data.items():
            if key in BLOCKS:
                setattr(config, key, _block_from_dict(key, value))
            elif key == "output_dir":
                config.output_dir = str(value)
            else:
                raise ConfigurationError("unknown key", key=key)
        return config

    def validate(self) -> bool:
        """
        Validate configuration settings.

        Builds the market, utility, liability and grid so every parameter
        domain is checked at load.

        Returns:
            True if configuration is valid

        Raises:
            ConfigurationError: If configuration is invalid
        """
        grid = self.grid.build()
        coeffs = self.market.build()
        coeffs.validate(grid)
        utility = self.utility.build()
        liability = self.liability.build()

        mc = self.mc
        for name in ("n_paths", "threads"):
            value = getattr(mc, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigurationError("must be a positive integer", key=f"mc.{name}")
        if mc.dump_paths < 0:
            raise ConfigurationError("must be nonnegative", key="mc.dump_paths")

        solver = self.solver
        if solver.tier not in TIERS:
            raise ConfigurationError(f"must be one of {TIERS}, got {solver.tier!r}",
                                     key="solver.tier")
        if solver.estimator not in ESTIMATORS:
            raise ConfigurationError(f"must be one of {ESTIMATORS}", key="solver.estimator")
        if not solver.tol > 0:
            raise ConfigurationError("must be positive", key="solver.tol")
        if not 0 < solver.tail_eps < 1:
            raise ConfigurationError("must lie in (0, 1)", key="solver.tail_eps")
        if not 0 < solver.damping <= 1:
            raise ConfigurationError("must lie in (0, 1]", key="solver.damping")
        if solver.n_iter < 0 or solver.regression_degree < 0 or solver.picard_paths < 1:
            raise ConfigurationError("Picard settings must be nonnegative (picard_paths >= 1)",
                                     key="solver")

        exponential_jump = isinstance(utility, ExponentialUtility) and coeffs.is_pure_jump
        if solver.tier == "ode" and not (exponential_jump and liability.constant_value is not None):
            raise ConfigurationError("tier ode needs exponential utility, pure_jump mode and a "
                                     "constant liability", key="solver.tier")
        if solver.tier == "lattice" and not (exponential_jump
                                             and not liability.depends_on_brownian):
            raise ConfigurationError("tier lattice needs exponential utility, pure_jump mode and "
                                     "a liability of N_T", key="solver.tier")

        unknown = sorted(set(self.verify.checks) - set(CHECKS))
        if unknown:
            raise ConfigurationError(f"unknown check(s) {unknown}", key="verify.checks")
        if not self.verify.band > 0:
            raise ConfigurationError("must be positive", key="verify.band")
        if self.logging.level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigurationError(f"unknown level {self.logging.level!r}", key="logging.level")
        return True

    def setup_logging(self) -> None:
        """Setup logging based on configuration."""
        logging_level = getattr(logging, self.logging.level.upper(), logging.INFO)

        handlers: List[logging.Handler] = []

        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging_level)
        console_handler.setFormatter(logging.Formatter(self.logging.format))
        handlers.append(console_handler)

        if self.logging.file_path:
            try:
                from logging.handlers import RotatingFileHandler
                file_handler = RotatingFileHandler(
                    self.logging.file_path,
                    maxBytes=self.logging.max_file_size,
                    backupCount=self.logging.backup_count
                )
                file_handler.setLevel(logging_level)
                file_handler.setFormatter(logging.Formatter(self.logging.format))
                handlers.append(file_handler)
            except Exception as e:
                logger.warning(f"Failed to setup file logging: {e}")

        logging.basicConfig(
            level=logging_level,
            format=self.logging.format,
            handlers=handlers,
            force=True
        )


def parse_override(item: str) -> Tuple[str, Any]:
    """
    Split ``block.key=value``; the value is parsed as JSON, falling back to a string.

    Raises:
        ConfigurationError: If the item has no ``=`` or an empty key
    """
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} must have the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply ``--set`` style overrides to a raw config dictionary.

    Args:
        data: Raw configuration (not modified)
        overrides: Items ``dotted.key=value``

    Returns:
        New dictionary with the overrides applied
    """
    result = json.loads(json.dumps(data))
    for item in overrides:
        key, value = parse_override(item)
        parts = key.split(".")
        node = result
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError("cannot set a key below a non-object",
                                         key=".".join(parts[:depth + 1]))
            node = child
        node[parts[-1]] = value
        logger.debug(f"Override {key} = {value!r}")
    return result


def load_config_data(config_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read the raw configuration dictionary.

    Raises:
        ConfigurationError: If the file is missing or not valid JSON
    """
    config_path = Path(config_path)

    if not config_path.exists():
        raise ConfigurationError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in config file: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a JSON object")
    return data


def load_config(
    config_path: Union[str, Path], overrides: Sequence[str] = ()
) -> ExperimentConfig:
    """
    Load configuration from file.

    Args:
        config_path: Path to configuration file
        overrides: ``key=value`` items applied on top of the file

    Returns:
        Loaded and validated configuration

    Raises:
        ConfigurationError: If the file is missing or the configuration is invalid
    """
    data = apply_overrides(load_config_data(config_path), overrides)
    config = ExperimentConfig.from_dict(data)
    config.validate()
    return config


def save_config(config: ExperimentConfig, config_path: Union[str, Path]) -> None:
    """
    Save configuration to file.

    Args:
        config: Configuration to save
        config_path: Path to save configuration
    """
    config_path = Path(config_path)
    config_path.parent.mkdir(parents=True, exist_ok=True)

    try:
        with open(config_path, "w", encoding="utf-8") as f:
            json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)
            f.write("\n")

        logger.info(f"Configuration saved to {config_path}")

    except Exception as e:
        logger.error(f"Failed to save configuration: {e}")
        raise


def create_default_config(output_dir: str = "output") -> ExperimentConfig:
    """
    Create the reference experiment configuration.

    Pure-jump market with mu = 0.1, eta = 0.5, nu = 1 (m = 0.2), exponential
    utility with delta = 1, T = 1, M = 100, H = 0, 10^5 paths, seed 7.

    Args:
        output_dir: Output directory path

    Returns:
        Default configuration
    """
    config = ExperimentConfig()
    config.output_dir = output_dir
    return config


def get_environment_config() -> ExperimentConfig:
    """
    Create configuration from environment variables.

    Reads JUMPFBSDE_OUTPUT_DIR, JUMPFBSDE_SEED, JUMPFBSDE_N_PATHS,
    JUMPFBSDE_THREADS and JUMPFBSDE_LOG_LEVEL.

    Returns:
        Configuration built from environment variables
    """
    config = ExperimentConfig()

    if os.getenv("JUMPFBSDE_OUTPUT_DIR"):
        config.output_dir = os.environ["JUMPFBSDE_OUTPUT_DIR"]
    if os.getenv("JUMPFBSDE_SEED"):
        config.mc.seed = int(os.environ["JUMPFBSDE_SEED"])
    if os.getenv("JUMPFBSDE_N_PATHS"):
        config.mc.n_paths = int(os.environ["JUMPFBSDE_N_PATHS"])
    if os.getenv("JUMPFBSDE_THREADS"):
        config.mc.threads = int(os.environ["JUMPFBSDE_THREADS"])
    if os.getenv("JUMPFBSDE_LOG_LEVEL"):
        config.logging.level = os.environ["JUMPFBSDE_LOG_LEVEL"]

    return config
