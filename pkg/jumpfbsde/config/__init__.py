"""
jumpfbsde Configuration Module

This module handles configuration management for experiments: market,
utility, liability, grid, Monte Carlo, solver and verification settings.
"""

from .settings import (
    ExperimentConfig,
    apply_overrides,
    create_default_config,
    get_environment_config,
    load_config,
    save_config,
)

__all__ = [
    'ExperimentConfig',
    'apply_overrides',
    'create_default_config',
    'get_environment_config',
    'load_config',
    'save_config',
]
