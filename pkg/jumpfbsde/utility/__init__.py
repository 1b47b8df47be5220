"""Utility functions with bounded absolute risk aversion."""

from .functions import (ExponentialMixtureUtility, ExponentialUtility, UtilityFunction,
                        build_utility, invert_marginal)

__all__ = ['UtilityFunction', 'ExponentialUtility', 'ExponentialMixtureUtility', 'build_utility',
           'invert_marginal']
