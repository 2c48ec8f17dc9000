"""Closed-form Beta-binomial belief arithmetic for pairwise association strength.

Every source pair carries a Beta(alpha, beta) belief over a latent success
probability pi: the chance that a shared opportunity turns into an observed
co-occurrence. Co-occurrence counts are binomial given the opportunity count,
so belief revision, point estimates and the predictive distribution over
future counts all stay in closed form. Everything here is a pure function on
immutable values; all probability work happens in log space via log-gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

# Smallest pseudo-count a forgetful (mixed) update may leave behind. A mix
# with kappa=0 and w=0 (or w=x) would otherwise zero out a Beta parameter.
MIN_PSEUDOCOUNT = 1e-3


@dataclass(frozen=True)
class PairPosterior:
    """Beta belief over one pair's attraction probability.

    alpha counts opportunities that manifested as co-occurrences, beta counts
    those that did not; both are pseudo-counts and must stay positive.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError(
                f"Beta parameters must be positive, got ({self.alpha}, {self.beta})"
            )


@dataclass(frozen=True)
class PairObservation:
    """One step's evidence for a pair: co-occurrences out of opportunities."""

    co_occurrences: int
    opportunities: int

    def __post_init__(self):
        if self.co_occurrences < 0:
            raise ValueError(f"negative co-occurrence count {self.co_occurrences}")
        if self.co_occurrences > self.opportunities:
            raise ValueError(
                f"co-occurrences ({self.co_occurrences}) exceed "
                f"opportunities ({self.opportunities})"
            )


@dataclass(frozen=True)
class PosteriorSummary:
    """Point summaries of a pair belief: mean attraction and expected count."""

    mean_pi: float
    expected_w: float


def _log_choose(x: float, w: float) -> float:
    return math.lgamma(x + 1) - math.lgamma(w + 1) - math.lgamma(x - w + 1)


def binomial_log_likelihood(w: int, x: int, pi: float) -> float:
    """Log-probability of w co-occurrences in x opportunities at rate pi.

    log[ C(x, w) * pi^w * (1 - pi)^(x - w) ]. At pi = 0 or pi = 1 the
    impossible outcomes return -inf and the certain one returns 0.
    """
    if not 0 <= w <= x:
        raise ValueError(f"need 0 <= w <= x, got w={w}, x={x}")
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi must lie in [0, 1], got {pi}")
    if pi == 0.0:
        return 0.0 if w == 0 else -math.inf
    if pi == 1.0:
        return 0.0 if w == x else -math.inf
    return _log_choose(x, w) + w * math.log(pi) + (x - w) * math.log1p(-pi)


def ml_estimate(w: int, x: int) -> float:
    """Maximum-likelihood attraction estimate w / x.

    A baseline only: it collapses to a point value and is undefined when a
    pair had no opportunities, which the Bayesian path handles gracefully.
    """
    if not 0 <= w <= x:
        raise ValueError(f"need 0 <= w <= x, got w={w}, x={x}")
    if x == 0:
        raise ValueError("ML estimate undefined for zero opportunities")
    return w / x


def update_cumulative(prior: PairPosterior, obs: PairObservation) -> PairPosterior:
    """Conjugate update: alpha absorbs w, beta absorbs x - w."""
    a, b = _update_arrays(
        prior.alpha, prior.beta, obs.co_occurrences, obs.opportunities
    )
    return PairPosterior(float(a), float(b))


def update_mixed(
    prior: PairPosterior, obs: PairObservation, kappa: float
) -> PairPosterior:
    """Forgetful update: convex mix of prior pseudo-counts and fresh evidence.

    Returns (kappa * alpha + (1 - kappa) * w, kappa * beta + (1 - kappa) * (x - w)).
    kappa = 1 keeps the prior untouched, kappa = 0 keeps only the new data;
    parameters that would drop to zero are floored at MIN_PSEUDOCOUNT so the
    belief stays a proper Beta.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    a, b = _update_arrays(
        prior.alpha, prior.beta, obs.co_occurrences, obs.opportunities, kappa=kappa
    )
    return PairPosterior(float(a), float(b))


def posterior_mean(p: PairPosterior) -> float:
    """Expected attraction probability alpha / (alpha + beta)."""
    return p.alpha / (p.alpha + p.beta)


def expected_weight(p: PairPosterior, x: int) -> float:
    """Expected co-occurrence count for x opportunities: x * alpha / (alpha + beta)."""
    return x * p.alpha / (p.alpha + p.beta)


def summarize(p: PairPosterior, x: int) -> PosteriorSummary:
    """Bundle the two point summaries for a pair at its current x."""
    m = posterior_mean(p)
    return PosteriorSummary(mean_pi=m, expected_w=x * m)


def beta_log_pdf(pi: float, p: PairPosterior) -> float:
    """Log-density of the Beta(alpha, beta) belief at an interior point pi.

    Defined on the open interval (0, 1); endpoint values depend on the
    parameters and callers wanting them should take limits explicitly.
    """
    if not 0.0 < pi < 1.0:
        raise ValueError(f"pi must lie strictly inside (0, 1), got {pi}")
    return (
        (p.alpha - 1.0) * math.log(pi)
        + (p.beta - 1.0) * math.log1p(-pi)
        - _log_beta(p.alpha, p.beta)
    )


def beta_binomial_log_pmf(w: int, x: int, p: PairPosterior) -> float:
    """Log-probability of w future co-occurrences in x opportunities.

    The attraction probability is integrated out against the Beta belief:
    log[ C(x, w) * B(w + alpha, x - w + beta) / B(alpha, beta) ].
    """
    if not 0 <= w <= x:
        raise ValueError(f"need 0 <= w <= x, got w={w}, x={x}")
    return (
        _log_choose(x, w)
        + _log_beta(w + p.alpha, x - w + p.beta)
        - _log_beta(p.alpha, p.beta)
    )


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


# Array twins of the update and predictive formulas. The streaming engine and
# the filter bank work on whole pair tables at once; keeping the arithmetic
# here means the scalar operations above and the vectorized paths can never
# drift apart.


def _update_arrays(alpha, beta, w, x, kappa: float | None = None):
    """Apply the cumulative or mixed update rule elementwise."""
    if kappa is None:
        return alpha + w, beta + (x - w)
    a = kappa * alpha + (1.0 - kappa) * w
    b = kappa * beta + (1.0 - kappa) * (x - w)
    a = np.where(a <= 0.0, MIN_PSEUDOCOUNT, a)
    b = np.where(b <= 0.0, MIN_PSEUDOCOUNT, b)
    return a, b


def _beta_binomial_log_pmf_arrays(w, x, alpha, beta):
    """Vectorized predictive log-pmf over parallel arrays."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    log_choose = gammaln(x + 1.0) - gammaln(w + 1.0) - gammaln(x - w + 1.0)
    return log_choose + betaln(w + alpha, x - w + beta) - betaln(alpha, beta)
