"""Interchangeable particle-weight estimators for the PMC samplers.

Three implementations of the same contract:

* ``mcpmc_weights``: one multinomial classifier over all particles; its
  class probability at the observed summary, corrected by the empirical
  class prior, replaces the likelihood term in the importance weight.
* ``lfire_weights``: one binary classifier per particle against draws from
  the prior-predictive (marginal) distribution, giving a likelihood-to-
  evidence ratio estimate per particle.
* ``exact_weights``: the analytic Gaussian-benchmark oracle, used as ground
  truth in evaluations.

All weights are computed in log space and exponentiated with a shared
offset; a particle gets an exact zero weight only when it falls outside
the prior support.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import (
    FitOptions,
    LabeledFeatures,
    fit_binary,
    fit_multinomial,
    predict_log_proba,
)
from .exceptions import DegenerateWeights
from .models import exact_log_likelihood_many
from .parallel import parallel_map

MAX_MARGINAL_SIMS = 5000


def default_marginal_count(num_particles: int, sims_per_particle: int) -> int:
    """Marginal-sample budget for the ratio estimator: N*M/2, capped."""
    return max(1, min(num_particles * sims_per_particle // 2, MAX_MARGINAL_SIMS))


@dataclass
class WeightEstimate:
    """Unnormalized particle weights plus per-particle diagnostics."""

    unnormalized: np.ndarray
    log_terms: dict
    simulator_calls_used: int
    fit_seconds: float = 0.0


@dataclass
class EstimatorContext:
    """Everything a weight estimator may need for one sampler iteration."""

    particles: np.ndarray
    prior: object
    proposal: object
    observed_data: np.ndarray
    observed_summary: np.ndarray
    sim_features: np.ndarray | None = None       # (N, M, s)
    marginal_features: np.ndarray | None = None  # (M_marg, s)
    threads: int = 1


def _assemble(log_target, particles, prior, proposal, calls, extra_terms, fit_seconds=0.0):
    log_prior = prior.logpdf_many(particles)
    log_proposal = proposal.logpdf_many(particles)
    logw = log_target + log_prior - log_proposal
    in_support = log_prior > -np.inf
    weights = np.zeros(len(particles))
    if not np.any(in_support):
        raise DegenerateWeights("every particle lies outside the prior support")
    offset = np.max(logw[in_support])
    weights[in_support] = np.exp(logw[in_support] - offset)
    terms = {"log_prior": log_prior, "log_proposal": log_proposal}
    terms.update(extra_terms)
    return WeightEstimate(
        unnormalized=weights,
        log_terms=terms,
        simulator_calls_used=int(calls),
        fit_seconds=fit_seconds,
    )


def mcpmc_weights(particles, sim_features, observed_summary, prior, proposal,
                  opts: FitOptions | None = None) -> WeightEstimate:
    """Multi-class importance weights.

    One multinomial classifier is trained on N classes (labels are particle
    indices) with M summary rows each. The unnormalized weight of particle i
    is exp(log p(class_i | observed) + log prior - log proposal
    - log empirical-class-prior_i); exactly 0 outside the prior support.
    """
    sim_features = np.asarray(sim_features, dtype=float)
    if sim_features.ndim != 3:
        raise ValueError("sim_features must have shape (N, M, s)")
    n, m_per, s = sim_features.shape
    if n < 2:
        raise ValueError("need at least 2 particles")
    data = LabeledFeatures(
        features=sim_features.reshape(n * m_per, s),
        labels=np.repeat(np.arange(n), m_per),
    )
    start = time.perf_counter()
    model = fit_multinomial(data, opts)
    fit_seconds = time.perf_counter() - start
    log_class_prob = predict_log_proba(model, np.asarray(observed_summary, dtype=float))
    log_class_prior = np.log(model.class_counts) - np.log(model.class_counts.sum())
    return _assemble(
        log_class_prob - log_class_prior,
        np.atleast_2d(particles),
        prior,
        proposal,
        calls=n * m_per,
        extra_terms={"log_class_prob": log_class_prob, "log_class_prior": log_class_prior},
        fit_seconds=fit_seconds,
    )


def lfire_weights(particles, sim_features, marginal_features, observed_summary,
                  prior, proposal, opts: FitOptions | None = None,
                  threads: int = 1) -> WeightEstimate:
    """Ratio-estimation importance weights.

    For each particle a binary classifier separates its simulations
    (class 1) from marginal simulations (class 0). The log likelihood-to-
    evidence ratio at the observed summary is the class log-odds plus
    log((1 - pi)/pi) with pi the class-1 training fraction.
    """
    sim_features = np.asarray(sim_features, dtype=float)
    marginal_features = np.atleast_2d(np.asarray(marginal_features, dtype=float))
    if sim_features.ndim != 3:
        raise ValueError("sim_features must have shape (N, M, s)")
    n, m_per, s = sim_features.shape
    m_marg = len(marginal_features)
    observed_summary = np.asarray(observed_summary, dtype=float)
    labels = np.concatenate([np.zeros(m_marg, dtype=int), np.ones(m_per, dtype=int)])

    def fit_one(i):
        data = LabeledFeatures(
            features=np.vstack([marginal_features, sim_features[i]]),
            labels=labels,
        )
        model = fit_binary(data, opts)
        lp = predict_log_proba(model, observed_summary)
        # Bayes inversion of the class posterior: log r = log-odds + log((1-pi)/pi)
        return float(lp[1] - lp[0] + np.log(m_marg) - np.log(m_per))

    start = time.perf_counter()
    log_ratio = np.array(parallel_map(fit_one, n, threads))
    fit_seconds = time.perf_counter() - start
    return _assemble(
        log_ratio,
        np.atleast_2d(particles),
        prior,
        proposal,
        calls=n * m_per + m_marg,
        extra_terms={"log_ratio": log_ratio},
        fit_seconds=fit_seconds,
    )


def exact_weights(particles, observed_data, prior, proposal) -> WeightEstimate:
    """Ground-truth weights from the closed-form Gaussian likelihood."""
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    log_lik = exact_log_likelihood_many(particles, observed_data)
    return _assemble(
        log_lik, particles, prior, proposal,
        calls=0, extra_terms={"log_likelihood": log_lik},
    )


class ExactOracle:
    """WeightEstimator backed by the analytic benchmark likelihood."""

    name = "exact"
    uses_simulations = False

    def marginal_count(self, num_particles: int, sims_per_particle: int) -> int:
        return 0

    def estimate(self, ctx: EstimatorContext) -> WeightEstimate:
        return exact_weights(ctx.particles, ctx.observed_data, ctx.prior, ctx.proposal)


class MulticlassEstimator:
    """WeightEstimator using one multinomial classifier across particles."""

    name = "mcpmc"
    uses_simulations = True

    def __init__(self, fit_options: FitOptions | None = None):
        self.fit_options = fit_options or FitOptions()

    def marginal_count(self, num_particles: int, sims_per_particle: int) -> int:
        return 0

    def estimate(self, ctx: EstimatorContext) -> WeightEstimate:
        return mcpmc_weights(
            ctx.particles, ctx.sim_features, ctx.observed_summary,
            ctx.prior, ctx.proposal, self.fit_options,
        )


class LfireEstimator:
    """WeightEstimator using per-particle binary ratio estimation."""

    name = "lfire"
    uses_simulations = True

    def __init__(self, fit_options: FitOptions | None = None,
                 marginal_sims: int | None = None):
        self.fit_options = fit_options or FitOptions()
        if marginal_sims is not None and marginal_sims < 1:
            raise ValueError("marginal_sims must be >= 1")
        self.marginal_sims = marginal_sims

    def marginal_count(self, num_particles: int, sims_per_particle: int) -> int:
        if self.marginal_sims is not None:
            return self.marginal_sims
        return default_marginal_count(num_particles, sims_per_particle)

    def estimate(self, ctx: EstimatorContext) -> WeightEstimate:
        return lfire_weights(
            ctx.particles, ctx.sim_features, ctx.marginal_features,
            ctx.observed_summary, ctx.prior, ctx.proposal,
            self.fit_options, ctx.threads,
        )
