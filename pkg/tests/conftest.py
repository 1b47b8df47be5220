"""Shared fixtures: the closed-form reference market and small grids."""

import json

import pytest

from jumpfbsde.bsde.liability import ZeroLiability
from jumpfbsde.config.settings import ExperimentConfig
from jumpfbsde.market.coefficients import MarketCoefficients, TimeGrid
from jumpfbsde.utility.functions import ExponentialMixtureUtility, ExponentialUtility

# mu = 0.1, eta = 0.5, nu = 1, delta = 1
REFERENCE_Y0 = 0.02148516
REFERENCE_PI = 0.44628710
REFERENCE_LAMBDA = 0.35702968
REFERENCE_PSI_STAR = -0.22314355
MERTON_PI = 0.625


@pytest.fixture
def reference_market():
    return MarketCoefficients.constant(mu=0.1, sigma=0.0, eta=0.5, nu=1.0)


@pytest.fixture
def merton_market():
    return MarketCoefficients.constant(mu=0.05, sigma=0.2, eta=0.0, nu=1.0)


@pytest.fixture
def jump_diffusion_market():
    return MarketCoefficients.constant(mu=0.1, sigma=0.2, eta=0.5, nu=1.0)


@pytest.fixture
def exp_utility():
    return ExponentialUtility(1.0)


@pytest.fixture
def mixture_utility():
    return ExponentialMixtureUtility([0.5, 0.5], [1.0, 3.0])


@pytest.fixture
def zero_liability():
    return ZeroLiability()


@pytest.fixture
def grid():
    return TimeGrid(T=1.0, M=20)


@pytest.fixture
def reference_config_file(tmp_path):
    """Default configuration written to disk, with quiet logging."""
    data = ExperimentConfig().to_dict()
    data["logging"]["level"] = "WARNING"
    path = tmp_path / "reference.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path
