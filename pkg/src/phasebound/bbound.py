"""Bayesian lower bounds on the posterior variance at a fixed true phase.

The Ghosh bound dominates the posterior variance for each individual record:

    (f - 1)^2 / J_post <= Var_post,

where J_post is the Fisher information of the posterior density itself and
f is a boundary term built from the posterior values at the domain endpoints
(it vanishes whenever the prior vanishes there).  Averaging the per-record
bound over the likelihood gives a record-independent bound on the average
posterior variance.

Asymptotically the posterior approaches a Gaussian centred at the true phase
with variance 1/(m F) (Laplace-Bernstein-von Mises); on that reference
density the Ghosh bound is saturated, which is the regime where Bayesian and
frequentist error bars agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimate import Posterior, posterior_table
from .model import GhzParityModel, ModelError, PhaseDomain, tally_pmf
from .numerics import (
    DEFAULTS,
    NonIntegrablePriorError,
    NumericalFailure,
    PriorDensity,
    QuadratureGrid,
    Tolerances,
    fisher_information_of_density,
    integrate,
)


class NonIntegrablePosteriorError(NumericalFailure):
    """The posterior Fisher information diverges (zero density, nonzero slope)."""


@dataclass(frozen=True)
class GhoshInputs:
    """Posterior, estimate, and domain entering one Ghosh bound evaluation."""

    posterior: Posterior
    theta_bl: float
    domain: PhaseDomain

    def __post_init__(self):
        if not self.domain.contains(self.theta_bl):
            raise ModelError(f"theta_bl={self.theta_bl} outside the phase domain")


def boundary_term(inputs: GhoshInputs) -> float:
    """f = b p(b) - a p(a) - theta_bl (p(b) - p(a)) from posterior boundary values."""
    pa, pb = inputs.posterior.boundary_values
    a, b = inputs.domain.a, inputs.domain.b
    return b * pb - a * pa - inputs.theta_bl * (pb - pa)


def posterior_fisher_information(post: Posterior, tol: Tolerances = DEFAULTS) -> float:
    """Integral of (dp_post/dtheta)^2 / p_post over the phase domain.

    Nodes where the density vanishes contribute nothing when the derivative
    vanishes with it (up to rounding noise); a genuine zero with nonzero slope
    makes the integral divergent and raises.
    """
    try:
        return fisher_information_of_density(post.density, post.density_derivative,
                                             post.grid, tol=tol, what="posterior")
    except NonIntegrablePriorError as exc:
        raise NonIntegrablePosteriorError(str(exc)) from exc


def ghosh_bound(inputs: GhoshInputs, tol: Tolerances = DEFAULTS) -> float:
    """Ghosh lower bound (f - 1)^2 / J_post on the posterior variance."""
    f = boundary_term(inputs)
    j = posterior_fisher_information(inputs.posterior, tol=tol)
    num = (f - 1.0) ** 2
    if j <= 0.0:
        # a constant posterior has f = 1 exactly; the bound degenerates to 0
        if num <= 1e-18:
            return 0.0
        raise NonIntegrablePosteriorError("zero posterior information with nonzero numerator")
    return num / j


@dataclass(frozen=True)
class GhoshTable:
    """Per-tally Ghosh quantities for every record of m shots under one prior."""

    m: int
    marginal: np.ndarray        # p_mar(k), sums to 1 over k
    mean: np.ndarray            # posterior means theta_BL(k)
    center: np.ndarray          # centre used for the variance (mean or MAP)
    variance: np.ndarray        # posterior variance about the centre
    boundary: np.ndarray        # boundary terms f(k, a, b)
    information: np.ndarray     # posterior Fisher information J(k)
    ghosh: np.ndarray           # (f - 1)^2 / J


def ghosh_table(prior: PriorDensity, m: int, model: GhzParityModel,
                center: str = "mean", tol: Tolerances = DEFAULTS) -> GhoshTable:
    """Vectorised Ghosh bound components for all tallies k = 0..m at once.

    ``center`` selects the estimate the variance is taken about: the posterior
    mean (default) or the posterior mode ("map").
    """
    if center not in ("mean", "map"):
        raise ModelError(f"center must be 'mean' or 'map', got {center!r}")
    grid = prior.grid
    dens, ddens, marginal = posterior_table(prior, m, model)
    nodes, w = grid.nodes, grid.weights

    means = (dens * nodes) @ w
    if center == "mean":
        centers = means
    else:
        centers = nodes[np.argmax(dens, axis=1)]
    variance = ((nodes[None, :] - centers[:, None]) ** 2 * dens) @ w

    zero = dens == 0.0
    if np.any(zero):
        floor = tol.derivative_noise_rel * np.max(np.abs(ddens), axis=1, keepdims=True)
        bad = zero & (np.abs(ddens) > floor)
        if np.any(bad):
            k_bad = int(np.flatnonzero(np.any(bad, axis=1))[0])
            raise NonIntegrablePosteriorError(
                f"posterior for tally k={k_bad} has a zero with nonzero slope")
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(zero, 0.0, ddens**2 / np.where(zero, 1.0, dens))
    information = integrand @ w

    a, b = grid.a, grid.b
    boundary = b * dens[:, -1] - a * dens[:, 0] - means * (dens[:, -1] - dens[:, 0])
    num = (boundary - 1.0) ** 2
    degenerate = information <= 0.0
    if np.any(degenerate & (num > 1e-18)):
        k_bad = int(np.flatnonzero(degenerate & (num > 1e-18))[0])
        raise NonIntegrablePosteriorError(
            f"zero posterior information with nonzero numerator at tally k={k_bad}")
    ghosh = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, information))
    return GhoshTable(m=m, marginal=marginal, mean=means, center=centers,
                      variance=variance, boundary=boundary,
                      information=information, ghosh=ghosh)


def averaged_ghosh(theta0: float, m: int, model: GhzParityModel, prior: PriorDensity,
                   center: str = "mean", tol: Tolerances = DEFAULTS) -> float:
    """Likelihood-averaged Ghosh bound: sum_k GB(k) p(k | theta0).

    Lower-bounds the likelihood-averaged posterior variance; per-tally
    failures propagate with the offending tally named.
    """
    table = ghosh_table(prior, m, model, center=center, tol=tol)
    weights = tally_pmf(model, theta0, m)
    return float(np.sum(table.ghosh * weights))


def averaged_posterior_variance(theta0: float, m: int, model: GhzParityModel,
                                prior: PriorDensity, center: str = "mean",
                                tol: Tolerances = DEFAULTS) -> float:
    """Likelihood average of the posterior variance at fixed theta0."""
    table = ghosh_table(prior, m, model, center=center, tol=tol)
    weights = tally_pmf(model, theta0, m)
    return float(np.sum(table.variance * weights))


def lbvm_reference(theta0: float, m: int, model: GhzParityModel,
                   grid: QuadratureGrid | None = None) -> Posterior:
    """Gaussian reference posterior: mean theta0, variance 1/(m F), renormalised.

    This is the large-m limit shape of the true posterior; the returned object
    carries the analytic density derivative so it can feed the Ghosh bound,
    which it saturates.
    """
    if m < 1:
        raise ModelError("m must be >= 1")
    grid = grid or QuadratureGrid.simpson(PhaseDomain().a, PhaseDomain().b)
    fisher = float(model.fisher_information(theta0))
    scale = m * fisher
    density = np.exp(-0.5 * scale * (grid.nodes - theta0) ** 2)
    norm = integrate(density, grid)
    if norm <= 0.0:
        raise NumericalFailure("reference posterior underflowed on the grid")
    density = density / norm
    derivative = -scale * (grid.nodes - theta0) * density
    density.flags.writeable = False
    derivative.flags.writeable = False
    return Posterior(grid=grid, density=density, density_derivative=derivative,
                     tally=None, marginal=math.nan)
