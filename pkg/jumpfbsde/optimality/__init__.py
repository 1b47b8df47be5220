"""The implicit optimality equation and its explicit special cases."""

from .equations import (StateTuple, certify, deterministic_exponential_strategy,
                        exponential_pure_jump_strategy, merton_strategy, pure_jump_strategy,
                        residual_F, solve_G)

__all__ = [
    'StateTuple',
    'residual_F',
    'solve_G',
    'certify',
    'merton_strategy',
    'pure_jump_strategy',
    'exponential_pure_jump_strategy',
    'deterministic_exponential_strategy',
]
