"""Market model: coefficients, time grid, strategies and path simulation."""

from .coefficients import CoefficientFunction, MarketCoefficients, TimeGrid
from .simulation import PathBundle, WealthPath, integrate_wealth, simulate_paths
from .strategies import (ConstantStrategy, DeterministicStrategy, FeedbackStrategy,
                         LatticeStrategy, PerturbedStrategy, StepStrategy, Strategy,
                         TableStrategy)

__all__ = [
    'CoefficientFunction',
    'MarketCoefficients',
    'TimeGrid',
    'PathBundle',
    'WealthPath',
    'integrate_wealth',
    'simulate_paths',
    'Strategy',
    'ConstantStrategy',
    'StepStrategy',
    'DeterministicStrategy',
    'TableStrategy',
    'LatticeStrategy',
    'FeedbackStrategy',
    'PerturbedStrategy',
]
