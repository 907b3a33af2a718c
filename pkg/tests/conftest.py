import math

import pytest

from phasebound import (
    GhzParityModel,
    PhaseDomain,
    QuadratureGrid,
    family45_prior,
    flat_prior,
)


@pytest.fixture(scope="session")
def model():
    return GhzParityModel(2)


@pytest.fixture(scope="session")
def domain():
    return PhaseDomain()


@pytest.fixture(scope="session")
def grid():
    return QuadratureGrid.simpson(0.0, math.pi / 2)


@pytest.fixture(scope="session")
def flat(grid):
    return flat_prior(PhaseDomain(), grid)


@pytest.fixture(scope="session")
def prior_battery(grid, flat):
    """The priors exercised throughout: flat plus four exponential-sine shapes."""
    priors = {"flat": flat}
    for alpha in (-100.0, -10.0, 1.0, 10.0):
        priors[f"alpha={alpha:g}"] = family45_prior(alpha, grid)
    return priors
