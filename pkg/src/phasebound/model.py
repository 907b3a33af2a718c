"""GHZ-parity interferometric likelihood model.

An N-qubit GHZ probe read out through a parity measurement produces a binary
outcome mu = +/-1 whose single-shot probability is

    p(+1 | theta) = (1 + cos(N theta)) / 2,
    p(-1 | theta) = 1 - p(+1 | theta).

A record of m independent shots is summarised without loss by the tally
k = number of +1 outcomes; the probability of any particular sequence with
tally k is p_+^k p_-^(m-k), and C(m, k) sequences share it.  All expectations
over measurement records are therefore sums of m+1 tally terms instead of
2^m sequence terms.

The Fisher information of this model is N^2 at every phase.  The naive
quotient (dp/dtheta)^2 / p degenerates to 0/0 where p_+ p_- = 0, so
``fisher_information`` uses the reduced analytic form rather than the
direct sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy


class ModelError(ValueError):
    """Invalid model construction or evaluation request."""


class SingularModelError(ModelError):
    """A likelihood table has p(mu|theta) = 0 with a nonzero derivative."""


@dataclass(frozen=True)
class PhaseDomain:
    """Closed phase interval [a, b] on which estimation takes place."""

    a: float = 0.0
    b: float = math.pi / 2

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ModelError("domain endpoints must be finite")
        if not self.a < self.b:
            raise ModelError(f"domain requires a < b, got [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a

    def contains(self, theta: float) -> bool:
        return self.a <= theta <= self.b

    def clip(self, theta):
        return np.clip(theta, self.a, self.b)


@dataclass(frozen=True)
class GhzParityModel:
    """Binary-outcome likelihood of an N-qubit GHZ probe with parity readout."""

    n_qubits: int = 2

    def __post_init__(self):
        if not isinstance(self.n_qubits, (int, np.integer)) or self.n_qubits < 1:
            raise ModelError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")

    def prob_plus(self, theta):
        """Single-shot probability of the +1 outcome, in [0, 1]."""
        return (1.0 + np.cos(self.n_qubits * np.asarray(theta, dtype=float))) / 2.0

    def prob_minus(self, theta):
        """Single-shot probability of the -1 outcome, the exact complement."""
        return 1.0 - self.prob_plus(theta)

    def dprob_dtheta(self, theta, outcome: int = +1):
        """Analytic d p(mu|theta) / d theta for outcome mu = +/-1."""
        if outcome not in (+1, -1):
            raise ModelError(f"outcome must be +1 or -1, got {outcome!r}")
        d = -(self.n_qubits / 2.0) * np.sin(self.n_qubits * np.asarray(theta, dtype=float))
        return d if outcome == +1 else -d

    def fisher_information(self, theta):
        """Single-shot Fisher information; identically N^2 for this model.

        The direct sum (dp/dtheta)^2 / p over both outcomes cancels to N^2:
        (N^2/4) sin^2(N theta) / (p_+ p_-) with p_+ p_- = sin^2(N theta)/4.
        The reduced form keeps the value finite at the endpoints where the
        quotient is 0/0.
        """
        theta = np.asarray(theta, dtype=float)
        n2 = float(self.n_qubits) ** 2
        if theta.shape == ():
            return n2
        return np.full(theta.shape, n2)


@dataclass(frozen=True)
class ModelPoint:
    """True phase and sample size at which risks and bounds are evaluated."""

    theta0: float
    m: int

    def __post_init__(self):
        if not math.isfinite(self.theta0):
            raise ModelError("theta0 must be finite")
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ModelError(f"m must be a positive integer, got {self.m!r}")

    def validate_in(self, domain: PhaseDomain) -> "ModelPoint":
        if not domain.contains(self.theta0):
            raise ModelError(f"theta0={self.theta0} outside [{domain.a}, {domain.b}]")
        return self


def prob_plus(model: GhzParityModel, theta):
    return model.prob_plus(theta)


def prob_minus(model: GhzParityModel, theta):
    return model.prob_minus(theta)


def dprob_dtheta(model: GhzParityModel, theta, outcome: int = +1):
    return model.dprob_dtheta(theta, outcome)


def fisher_information(model: GhzParityModel, theta):
    return model.fisher_information(theta)


def fisher_information_from_table(probs, dprobs) -> float:
    """Fisher information of a tabulated finite-outcome likelihood.

    Uses the term-wise convention 0^2/0 := 0 where an outcome has zero
    probability and zero derivative; a zero-probability outcome with a
    nonzero derivative makes the information undefined.
    """
    probs = np.asarray(probs, dtype=float)
    dprobs = np.asarray(dprobs, dtype=float)
    if probs.shape != dprobs.shape:
        raise ModelError("probs and dprobs must have matching shapes")
    zero = probs == 0.0
    if np.any(zero & (dprobs != 0.0)):
        raise SingularModelError("p(mu|theta)=0 with nonzero derivative")
    terms = np.where(zero, 0.0, dprobs**2 / np.where(zero, 1.0, probs))
    return float(np.sum(terms))


def _validate_tally(m: int, k) -> np.ndarray:
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ModelError(f"m must be a nonnegative integer, got {m!r}")
    k = np.asarray(k)
    if not np.issubdtype(k.dtype, np.integer):
        raise ModelError("k must be integer valued")
    if np.any(k < 0) or np.any(k > m):
        raise ModelError(f"tally k must satisfy 0 <= k <= m={m}")
    return k


def log_binomial(m: int, k) -> np.ndarray:
    """log C(m, k) via log-gamma, exact to rounding for all m."""
    k = np.asarray(k, dtype=float)
    return gammaln(m + 1.0) - gammaln(k + 1.0) - gammaln(m - k + 1.0)


def tally_probability(model: GhzParityModel, theta, m: int, k):
    """Probability of observing k outcomes +1 in m shots at phase theta.

    Evaluated in the log domain, so large m neither overflows the binomial
    coefficient nor underflows the outcome powers prematurely.  The
    conventions 0*log(0) = 0 make the deterministic channels exact.
    """
    k = _validate_tally(m, k)
    pp = model.prob_plus(theta)
    pm = 1.0 - pp
    logp = log_binomial(m, k) + xlogy(k, pp) + xlogy(m - k, pm)
    out = np.exp(logp)
    return float(out) if np.ndim(out) == 0 else out


def tally_pmf(model: GhzParityModel, theta: float, m: int) -> np.ndarray:
    """Full tally distribution (k = 0..m) at a single phase."""
    return tally_probability(model, float(theta), m, np.arange(m + 1))


def tally_pmf_matrix(model: GhzParityModel, m: int, thetas) -> np.ndarray:
    """Tally probabilities for every k at every phase; shape (m+1, len(thetas))."""
    thetas = np.asarray(thetas, dtype=float)
    k = np.arange(m + 1)[:, None]
    pp = model.prob_plus(thetas)[None, :]
    pm = 1.0 - pp
    logc = log_binomial(m, k.ravel())[:, None]
    return np.exp(logc + xlogy(k, pp) + xlogy(m - k, pm))


def tally_pmf_dtheta_matrix(model: GhzParityModel, m: int, thetas) -> np.ndarray:
    """Analytic d/dtheta of the tally pmf; shape (m+1, len(thetas)).

    Each entry is C(m,k) p_+' [k p_+^(k-1) p_-^(m-k) - (m-k) p_+^k p_-^(m-k-1)],
    assembled from the k >= 1 and k <= m-1 slices so that deterministic
    channels (p_+ in {0,1}) produce exact zeros instead of 0 * inf.
    """
    thetas = np.asarray(thetas, dtype=float)
    pp = model.prob_plus(thetas)[None, :]
    pm = 1.0 - pp
    logc = log_binomial(m, np.arange(m + 1))[:, None]
    t1 = np.zeros((m + 1, thetas.size))
    t2 = np.zeros((m + 1, thetas.size))
    if m >= 1:
        k = np.arange(1, m + 1)[:, None]
        t1[1:] = k * np.exp(logc[1:] + xlogy(k - 1, pp) + xlogy(m - k, pm))
        k = np.arange(0, m)[:, None]
        t2[:m] = (m - k) * np.exp(logc[:m] + xlogy(k, pp) + xlogy(m - k - 1, pm))
    return model.dprob_dtheta(thetas, +1)[None, :] * (t1 - t2)


def tally_probability_dtheta(model: GhzParityModel, theta: float, m: int, k: int) -> float:
    """Scalar d/dtheta of one tally probability."""
    _validate_tally(m, np.asarray(k))
    col = tally_pmf_dtheta_matrix(model, m, np.asarray([theta]))
    return float(col[k, 0])
