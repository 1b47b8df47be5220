"""
jumpfbsde Utilities Module

Random streams, root finding, quadrature, regression and flat-file output.
"""

from .io import config_hash, write_csv, write_json
from .rng import draw_increments

__all__ = ['config_hash', 'draw_increments', 'write_csv', 'write_json']
