"""
jumpfbsde Core Module

This module contains the shared data structures, the exception hierarchy
and the experiment runner.
"""

from .data_structures import BsdeSolution, CheckResult, RunManifest, RunMetrics
from .exceptions import (ConfigurationError, DomainError, JumpFbsdeError, NumericalRangeError,
                         StrategyEvaluationError, VerificationError)

__all__ = [
    'BsdeSolution',
    'CheckResult',
    'RunManifest',
    'RunMetrics',
    'JumpFbsdeError',
    'ConfigurationError',
    'DomainError',
    'NumericalRangeError',
    'StrategyEvaluationError',
    'VerificationError',
]
