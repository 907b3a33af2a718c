"""Estimators, posterior construction, and the risk functions they feed.

Frequentist risks are exact tally sums: the mean, variance, and mean square
error of an estimator satisfy MSE = variance + bias^2 identically.  The
derivative of the estimator mean with respect to the true phase (the quantity
that turns the unbiased Cramer-Rao bound into its biased form) is computed
from the analytic derivative of the binomial weights, with a finite-difference
fallback for cross-checking.

Bayesian posteriors are held on a quadrature grid.  Densities and their
derivatives are assembled analytically from the likelihood and prior, never by
differencing grid values: the posterior Fisher information downstream is
sensitive to differentiation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import OutcomeTally, expect_values_over_tallies
from .model import (
    GhzParityModel,
    ModelError,
    PhaseDomain,
    tally_pmf_dtheta_matrix,
    tally_pmf_matrix,
)
from .numerics import NumericalFailure, PriorDensity, QuadratureGrid, integrate


class DegeneratePosteriorError(NumericalFailure):
    """The posterior normalisation integral underflowed to zero."""


@dataclass(frozen=True)
class GaussianDescriptor:
    """Mean/variance summary of an asymptotically normal estimator."""

    mean: float
    variance: float

    def density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.exp(-((theta - self.mean) ** 2) / (2.0 * self.variance)) / math.sqrt(
            2.0 * math.pi * self.variance)


@dataclass(frozen=True)
class RiskReport:
    """Frequentist risk summary of one estimator at one (theta0, m)."""

    mean: float
    variance: float
    mse: float
    bias_derivative: float


@dataclass(frozen=True)
class Posterior:
    """Gridded posterior density for one tally, with its analytic derivative."""

    grid: QuadratureGrid
    density: np.ndarray
    density_derivative: np.ndarray
    tally: OutcomeTally | None
    marginal: float

    @property
    def domain(self) -> PhaseDomain:
        return PhaseDomain(self.grid.a, self.grid.b)

    @property
    def boundary_values(self) -> tuple[float, float]:
        return float(self.density[0]), float(self.density[-1])


def mle(tally: OutcomeTally, model: GhzParityModel | None = None,
        domain: PhaseDomain | None = None) -> float:
    """Maximum-likelihood phase for a tally: (1/N) arccos((k_+ - k_-)/m), clipped.

    The closed form is the stationary point of the likelihood on the branch
    where cos(N theta) is monotone; it applies whenever [a, b] sits inside
    [0, pi/N] (the default domain for N = 2).  Outside that branch the
    likelihood is maximised numerically on the grid.
    """
    model = model or GhzParityModel()
    domain = domain or PhaseDomain()
    if tally.m < 1:
        raise ModelError("MLE requires at least one shot")
    n = model.n_qubits
    if domain.a >= -1e-12 and domain.b <= math.pi / n + 1e-12:
        x = (tally.k_plus - tally.k_minus) / tally.m
        return float(domain.clip(math.acos(max(-1.0, min(1.0, x))) / n))
    from .numerics import maximize_1d  # local import: rarely-used fallback

    def loglik(theta):
        pp = model.prob_plus(theta)
        pm = 1.0 - pp
        with np.errstate(divide="ignore"):
            val = tally.k_plus * np.log(pp) + tally.k_minus * np.log(pm)
        return float(val) if math.isfinite(val) else -math.inf

    arg, _ = maximize_1d(loglik, domain.a, domain.b, coarse_points=1001)
    return float(arg)


def build_posterior(prior: PriorDensity, tally: OutcomeTally, model: GhzParityModel,
                    grid: QuadratureGrid | None = None) -> Posterior:
    """Posterior density proportional to likelihood times prior, grid-normalised.

    The returned ``marginal`` is the tally's marginal probability
    p_mar(k) = integral of p(k|theta) p_pri(theta); these sum to one over k.
    """
    grid = grid or prior.grid
    if grid is not prior.grid and (grid.a != prior.grid.a or grid.b != prior.grid.b):
        raise ModelError("posterior grid must span the prior's domain")
    if grid.node_count < 3:
        raise ModelError("posterior grid needs at least 3 nodes")
    prior_values = prior.values if grid is prior.grid else prior.density(grid.nodes)
    prior_deriv = prior.derivative if grid is prior.grid else prior.density_derivative(grid.nodes)

    like = tally_pmf_matrix(model, tally.m, grid.nodes)[tally.k_plus]
    dlike = tally_pmf_dtheta_matrix(model, tally.m, grid.nodes)[tally.k_plus]
    raw = like * prior_values
    marginal = integrate(raw, grid)
    if marginal <= 0.0 or not math.isfinite(marginal):
        raise DegeneratePosteriorError(
            f"posterior normalisation underflowed for tally k={tally.k_plus}, m={tally.m}")
    density = raw / marginal
    derivative = (dlike * prior_values + like * prior_deriv) / marginal
    density.flags.writeable = False
    derivative.flags.writeable = False
    return Posterior(grid=grid, density=density, density_derivative=derivative,
                     tally=tally, marginal=marginal)


def posterior_mean(post: Posterior) -> float:
    return integrate(post.grid.nodes * post.density, post.grid)


def posterior_map(post: Posterior) -> float:
    """Smallest grid node attaining the density maximum (deterministic ties)."""
    return float(post.grid.nodes[int(np.argmax(post.density))])


def posterior_variance(post: Posterior, center: float | None = None) -> float:
    """Second moment of the posterior about ``center`` (default: its mean)."""
    if center is None:
        center = posterior_mean(post)
    return integrate((post.grid.nodes - center) ** 2 * post.density, post.grid)


class Estimator:
    """Maps outcome tallies to phases; per-m estimate vectors are cached."""

    name: str = "estimator"

    def __init__(self, model: GhzParityModel, domain: PhaseDomain):
        self.model = model
        self.domain = domain
        self._cache: dict[int, np.ndarray] = {}

    def _compute_values(self, m: int) -> np.ndarray:
        raise NotImplementedError

    def values(self, m: int) -> np.ndarray:
        if m not in self._cache:
            vals = np.clip(self._compute_values(m), self.domain.a, self.domain.b)
            vals.flags.writeable = False
            self._cache[m] = vals
        return self._cache[m]

    def estimate(self, tally: OutcomeTally) -> float:
        return float(self.values(tally.m)[tally.k_plus])


class MaximumLikelihoodEstimator(Estimator):
    name = "mle"

    def _compute_values(self, m: int) -> np.ndarray:
        return np.array([mle(OutcomeTally(k, m), self.model, self.domain)
                         for k in range(m + 1)])


class _PosteriorEstimator(Estimator):
    def __init__(self, model: GhzParityModel, prior: PriorDensity):
        super().__init__(model, prior.domain)
        self.prior = prior


class PosteriorMeanEstimator(_PosteriorEstimator):
    name = "bayes_mean"

    def _compute_values(self, m: int) -> np.ndarray:
        dens, _, _ = posterior_table(self.prior, m, self.model)
        return (dens * self.prior.grid.nodes) @ self.prior.grid.weights


class PosteriorModeEstimator(_PosteriorEstimator):
    name = "bayes_map"

    def _compute_values(self, m: int) -> np.ndarray:
        dens, _, _ = posterior_table(self.prior, m, self.model)
        return self.prior.grid.nodes[np.argmax(dens, axis=1)]


class ConstantEstimator(Estimator):
    """Ignores the data; useful as a degenerate reference."""

    def __init__(self, value: float, domain: PhaseDomain | None = None):
        super().__init__(GhzParityModel(), domain or PhaseDomain())
        self.value = float(value)
        self.name = f"constant({self.value:g})"

    def _compute_values(self, m: int) -> np.ndarray:
        return np.full(m + 1, self.value)


def posterior_table(prior: PriorDensity, m: int, model: GhzParityModel
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalised posterior densities and derivatives for every tally at once.

    Returns ``(density, derivative, marginal)`` with the first two of shape
    (m+1, nodes) and the marginal tally distribution of length m+1.  Rows with
    an underflowed marginal raise, naming the offending tally.
    """
    grid = prior.grid
    like = tally_pmf_matrix(model, m, grid.nodes)
    dlike = tally_pmf_dtheta_matrix(model, m, grid.nodes)
    raw = like * prior.values
    marginal = raw @ grid.weights
    bad = ~(np.isfinite(marginal) & (marginal > 0.0))
    if np.any(bad):
        raise DegeneratePosteriorError(
            f"posterior normalisation underflowed for tally k={int(np.flatnonzero(bad)[0])}, m={m}")
    density = raw / marginal[:, None]
    derivative = (dlike * prior.values + like * prior.derivative) / marginal[:, None]
    return density, derivative, marginal


def frequentist_risk(estimator: Estimator, theta0: float, m: int,
                     model: GhzParityModel) -> RiskReport:
    """Mean, variance, MSE, and mean-derivative of an estimator, by exact sums.

    The bias derivative d<theta_est>/dtheta0 uses the analytic weight
    derivative: each tally term carries the factor (k - m p_+) p_+' / (p_+ p_-).
    """
    v = estimator.values(m)
    mean = expect_values_over_tallies(v, theta0, m, model)
    variance = expect_values_over_tallies((v - mean) ** 2, theta0, m, model)
    mse = expect_values_over_tallies((v - theta0) ** 2, theta0, m, model)
    dpmf = tally_pmf_dtheta_matrix(model, m, np.asarray([theta0]))[:, 0]
    bias_derivative = float(np.sum(v * dpmf))
    return RiskReport(mean=mean, variance=variance, mse=mse,
                      bias_derivative=bias_derivative)


def bias_derivative_fd(estimator: Estimator, theta0: float, m: int,
                       model: GhzParityModel, step: float | None = None) -> float:
    """Central finite-difference cross-check of the analytic bias derivative."""
    if step is None:
        step = 1e-5 * estimator.domain.width
    v = estimator.values(m)
    up = expect_values_over_tallies(v, theta0 + step, m, model)
    dn = expect_values_over_tallies(v, theta0 - step, m, model)
    return (up - dn) / (2.0 * step)


def mle_asymptotic_density(theta0: float, m: int, model: GhzParityModel) -> GaussianDescriptor:
    """Large-m normal law of the MLE: mean theta0, variance 1/(m F(theta0))."""
    if m < 1:
        raise ModelError("m must be >= 1")
    fisher = float(model.fisher_information(theta0))
    if fisher <= 0.0:
        raise ModelError("asymptotic variance needs F(theta0) > 0")
    return GaussianDescriptor(mean=float(theta0), variance=1.0 / (m * fisher))
