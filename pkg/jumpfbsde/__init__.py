"""
jumpfbsde: Utility-maximizing portfolios in a jump-diffusion market via FBSDEs

A numerical library for the forward-backward characterization of optimal
investment with a Brownian and a Poisson driver: path simulation, the
implicit optimality equation, explicit pure-jump and exponential-utility
solutions, backward-equation solvers and Monte Carlo checks of the
optimality conditions.

Main Classes:
    ExperimentRunner: Runs one configured experiment end to end
    MarketCoefficients: Drift, volatility, jump size and intensity
    ExponentialUtility: U(x) = -exp(-delta x)
    BsdeSolution: Solution (Y, Z, Psi) on the time grid
    ExperimentConfig: Configuration management

Example:
    >>> from jumpfbsde import ExperimentRunner
    >>> from jumpfbsde.config import create_default_config
    >>>
    >>> config = create_default_config(output_dir="runs/reference")
    >>> runner = ExperimentRunner.from_config(config)
    >>> solution = runner.solve_bsde()
    >>> print(f"Y_0 = {solution.y0:.8f}")
"""

__version__ = "0.1.0"
__author__ = "Yuxing Lu"
__email__ = "yxlu0613@gmail.com"

# Core imports
from .core.data_structures import (
    AdjointProcess,
    BsdeSolution,
    CheckResult,
    PureInvestmentSolution,
    RunManifest,
)
from .core.exceptions import (
    ConfigurationError,
    DomainError,
    JumpFbsdeError,
    NumericalRangeError,
    StrategyEvaluationError,
    VerificationError,
)
from .core.pipeline import ExperimentRunner

# Configuration imports
from .config import ExperimentConfig, load_config, save_config

# Model imports
from .market import MarketCoefficients, PathBundle, TimeGrid, simulate_paths
from .utility import ExponentialMixtureUtility, ExponentialUtility, UtilityFunction
from .optimality import residual_F, solve_G
from .bsde import lattice_backward_induction, picard_solve_coupled

__all__ = [
    # Core classes
    'ExperimentRunner',
    'AdjointProcess',
    'BsdeSolution',
    'CheckResult',
    'PureInvestmentSolution',
    'RunManifest',

    # Errors
    'JumpFbsdeError',
    'ConfigurationError',
    'DomainError',
    'NumericalRangeError',
    'StrategyEvaluationError',
    'VerificationError',

    # Configuration
    'ExperimentConfig',
    'load_config',
    'save_config',

    # Model (for advanced usage)
    'MarketCoefficients',
    'PathBundle',
    'TimeGrid',
    'simulate_paths',
    'UtilityFunction',
    'ExponentialUtility',
    'ExponentialMixtureUtility',
    'residual_F',
    'solve_G',
    'lattice_backward_induction',
    'picard_solve_coupled',
]


def get_version() -> str:
    """Get the jumpfbsde version string."""
    return __version__


def get_info() -> dict:
    """Get information about the jumpfbsde package."""
    return {
        'name': 'jumpfbsde',
        'version': __version__,
        'author': __author__,
        'email': __email__,
        'description': 'Utility-maximizing portfolios in a jump-diffusion market via FBSDEs',
        'subcommands': ['simulate', 'solve-bsde', 'optimal-strategy', 'verify', 'report'],
        'tiers': ['ode', 'lattice', 'picard'],
    }
