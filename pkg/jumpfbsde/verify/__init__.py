"""Monte Carlo checks of the optimality conditions."""

from .estimators import gateaux_derivative, q_measure_drift_check, utility_gap
from .martingale import doleans_exponential, martingale_diagnostic
from .suite import CHECKS, VerificationSuite

__all__ = [
    'CHECKS',
    'VerificationSuite',
    'gateaux_derivative',
    'utility_gap',
    'q_measure_drift_check',
    'martingale_diagnostic',
    'doleans_exponential',
]
