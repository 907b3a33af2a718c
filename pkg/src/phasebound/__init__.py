"""Frequentist and Bayesian phase-estimation risks and their lower bounds.

The package evaluates, for a binary-outcome interferometric likelihood
(an N-qubit GHZ probe with parity readout):

* exact frequentist risks of maximum-likelihood and Bayesian estimators,
  with the full Barankin / extended-Chapman-Robbins / Chapman-Robbins /
  Cramer-Rao bound hierarchy (``fbound``);
* Bayesian posterior variances and the Ghosh bound family (``bbound``);
* averaged risks and bounds for a randomly fluctuating phase: Van Trees,
  Ziv-Zakai, averaged Cramer-Rao, and the averaged Ghosh bound (``rbound``);
* a quadrature/optimisation kernel and the prior families (``numerics``),
  exact tally expectations plus a seeded sampler (``engine``), and a CSV
  command-line harness (``cli``).
"""

__version__ = "0.1.0"

from .bbound import (
    GhoshInputs,
    averaged_ghosh,
    averaged_posterior_variance,
    boundary_term,
    ghosh_bound,
    ghosh_table,
    lbvm_reference,
    posterior_fisher_information,
)
from .engine import (
    OutcomeTally,
    SeededSampler,
    derive_seed,
    expect_over_tallies,
    sample_tallies,
    sample_tally,
)
from .estimate import (
    ConstantEstimator,
    Estimator,
    GaussianDescriptor,
    MaximumLikelihoodEstimator,
    Posterior,
    PosteriorMeanEstimator,
    PosteriorModeEstimator,
    RiskReport,
    build_posterior,
    frequentist_risk,
    mle,
    mle_asymptotic_density,
    posterior_map,
    posterior_mean,
    posterior_variance,
)
from .fbound import (
    BarankinConfig,
    BoundReport,
    HierarchyViolationError,
    barankin,
    barankin_at,
    chrb,
    chrb_objective,
    crlb,
    echrb,
    hierarchy_report,
)
from .model import GhzParityModel, ModelPoint, PhaseDomain, fisher_information, tally_probability
from .numerics import (
    DEFAULTS,
    NumericalFailure,
    PriorDensity,
    QuadratureGrid,
    Tolerances,
    bessel_i0,
    custom_prior,
    family45_prior,
    flat_prior,
    integrate,
    maximize_1d,
    prior_fisher_information,
    solve_spd,
)
from .rbound import (
    HypothesisTestCell,
    acrlb,
    agbr,
    avg_estimator_variance,
    avg_mse,
    bayes_avg_posterior_variance,
    bayes_chain_report,
    decision_rule_error_probability,
    estimator_chain_report,
    fvtb,
    pmin,
    tally_marginal,
    van_trees,
    ziv_zakai,
)
