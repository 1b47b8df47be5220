"""
Backward equations: exponential-utility tiers, pure investment and the coupled solver.
"""

from .exponential import (canonical_a, check_driver_bounds, deterministic_Y,
                          exponential_driver, lattice_backward_induction)
from .liability import Liability, build_liability
from .picard import PicardResult, picard_solve_coupled
from .pure_investment import construct_pure_investment

__all__ = [
    'canonical_a',
    'check_driver_bounds',
    'deterministic_Y',
    'exponential_driver',
    'lattice_backward_induction',
    'Liability',
    'build_liability',
    'PicardResult',
    'picard_solve_coupled',
    'construct_pure_investment',
]
