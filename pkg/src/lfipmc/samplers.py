"""Sampling drivers: adaptive-proposal PMC and a sequential ABC baseline.

``run_pmc`` iterates resample / Gaussian-perturb / simulate / reweight with
a pluggable weight estimator; ``run_smc_abc`` is the tolerance-schedule
rejection sampler it is compared against. Both record per-iteration
metrics and exact simulation-budget accounting in a :class:`SamplerTrace`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .core import (
    GaussianMixtureProposal,
    ParticleGeneration,
    effective_sample_size,
    ensure_spd,
    normalize_weights,
    weighted_covariance,
    weighted_mean,
)
from .evaluation import RunRecord, mse, rmse
from .exceptions import AttemptsExhausted, DegenerateWeights
from .models import CallCountingModel
from .parallel import parallel_map
from .weighting import EstimatorContext


@dataclass
class PmcConfig:
    """Settings for :func:`run_pmc`."""

    num_particles: int = 50
    max_iterations: int = 10
    sims_per_particle: int = 100
    stop_window: int = 10
    stop_threshold: float | None = None  # None disables early stopping
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.num_particles < 2:
            raise ValueError("num_particles must be >= 2")
        if self.max_iterations < 2:
            raise ValueError("max_iterations must be >= 2")
        if self.sims_per_particle < 1:
            raise ValueError("sims_per_particle must be >= 1")
        if self.stop_window < 2:
            raise ValueError("stop_window must be >= 2")
        if self.stop_threshold is not None and self.stop_threshold <= 0:
            raise ValueError("stop_threshold must be positive")


@dataclass
class SmcAbcConfig:
    """Settings for :func:`run_smc_abc`."""

    num_particles: int = 500
    schedule: tuple = (12.0, 9.0, 7.0, 5.5, 4.5, 3.75, 3.25, 2.85, 2.55, 2.3)
    max_attempts_per_particle: int = 100_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.num_particles < 2:
            raise ValueError("num_particles must be >= 2")
        eps = np.asarray(self.schedule, dtype=float)
        if eps.size < 1:
            raise ValueError("schedule must not be empty")
        if np.any(eps <= 0):
            raise ValueError("all tolerances must be positive")
        if np.any(np.diff(eps) > 0):
            raise ValueError("schedule must be non-increasing")
        self.schedule = tuple(float(e) for e in eps)
        if self.max_attempts_per_particle < 1:
            raise ValueError("max_attempts_per_particle must be >= 1")


@dataclass
class SamplerTrace:
    """Full history of a sampler run."""

    generations: list
    records: list
    stopped_at: object          # iteration index, or "max_iterations"
    total_simulator_calls: int
    seed: int
    method: str = ""
    distances: list = field(default=None, repr=False)  # SMC only: accepted d per generation

    @property
    def iterations(self) -> int:
        return len(self.generations)

    def weighted_means(self) -> np.ndarray:
        return np.vstack([g.mean() for g in self.generations])


def stopping_criterion(recent_means, window: int, threshold: float) -> bool:
    """True when the mean over dimensions of the per-dimension sample
    variance of the last ``window`` weighted means drops below ``threshold``.

    Returns False while fewer than ``window`` means are available.
    """
    means = np.atleast_2d(np.asarray(recent_means, dtype=float))
    if len(means) < window:
        return False
    tail = means[-window:]
    return bool(np.mean(np.var(tail, axis=0, ddof=1)) < threshold)


def posterior_expectation(trace: SamplerTrace, h, from_iteration: int = 1) -> float:
    """Pooled self-normalized estimate of E[h(theta)] over iterations
    >= ``from_iteration``, averaging the per-iteration weighted sums."""
    totals = []
    for gen in trace.generations:
        if gen.iteration < from_iteration:
            continue
        vals = np.array([float(h(theta)) for theta in gen.particles])
        totals.append(float(gen.weights @ vals))
    if not totals:
        raise ValueError("from_iteration is beyond the last iteration")
    return float(np.mean(totals))


def posterior_expectation_stderr(trace: SamplerTrace, h, from_iteration: int = 1) -> float:
    """Independent-draw standard-error estimate for :func:`posterior_expectation`."""
    estimate = posterior_expectation(trace, h, from_iteration)
    acc = 0.0
    count = 0
    for gen in trace.generations:
        if gen.iteration < from_iteration:
            continue
        vals = np.array([float(h(theta)) for theta in gen.particles])
        acc += float(np.sum((gen.weights * (vals - estimate)) ** 2))
        count += 1
    return float(np.sqrt(acc) / count)


def _record(iteration, particles, weights, obs_summary, true_theta, cum_calls, wall_ms):
    mean = weighted_mean(particles, weights)
    return RunRecord(
        iteration=iteration,
        weighted_mean=mean,
        mse_vs_observation=mse(mean, obs_summary),
        rmse_vs_truth=None if true_theta is None else rmse(mean, np.asarray(true_theta, dtype=float)),
        ess=effective_sample_size(weights),
        cumulative_sim_calls=int(cum_calls),
        wall_ms=int(wall_ms),
    )


def _generation_cov(particles, weights):
    cov, _singular = weighted_covariance(particles, weights)
    return ensure_spd(2.0 * cov)


def run_pmc(model, prior, estimator, cfg: PmcConfig, observed,
            true_theta=None) -> SamplerTrace:
    """Run the PMC sampler with the given weight estimator.

    Iteration 1 draws particles from the prior with uniform weights. Each
    later iteration resamples ancestors by weight, perturbs with
    N(., tau^2) where tau^2 is twice the previous generation's weighted
    covariance, simulates per-particle training data when the estimator
    needs it, and reweights. Out-of-support proposals keep weight zero and
    die at the next resampling; the particle count never changes.

    Raises :class:`DegenerateWeights` (carrying the partial trace) if every
    weight collapses to zero at some iteration.
    """
    counting = model if isinstance(model, CallCountingModel) else CallCountingModel(model)
    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    obs_summary = counting.summarize(observed)
    n = cfg.num_particles
    m = cfg.sims_per_particle
    d = counting.dim_theta
    seed = cfg.seed

    generations = []
    records = []
    means = []
    cum_calls = 0
    stopped_at = "max_iterations"

    start = time.perf_counter()
    particles = np.vstack([
        prior.sample(rngmod.substream(seed, 1, i, "init")) for i in range(n)
    ])
    weights = np.full(n, 1.0 / n)
    generations.append(ParticleGeneration(particles, weights, 1, _generation_cov(particles, weights)))
    records.append(_record(1, particles, weights, obs_summary, true_theta,
                           cum_calls, (time.perf_counter() - start) * 1000))
    means.append(records[-1].weighted_mean)

    for t in range(2, cfg.max_iterations + 1):
        start = time.perf_counter()
        prev = generations[-1]
        proposal = GaussianMixtureProposal(prev.particles, prev.weights, prev.proposal_cov)
        cum_w = np.cumsum(prev.weights)
        cum_w[-1] = 1.0
        chol = np.linalg.cholesky(prev.proposal_cov)

        def propose(i):
            idx = int(np.searchsorted(cum_w, rngmod.substream(seed, t, i, "resample").random()))
            noise = chol @ rngmod.substream(seed, t, i, "perturb").standard_normal(d)
            return prev.particles[idx] + noise

        particles = np.vstack(parallel_map(propose, n, cfg.threads))

        sim_features = None
        marginal_features = None
        iter_calls = 0
        if estimator.uses_simulations:
            def simulate_one(i):
                data = counting.simulate(particles[i], m, rngmod.substream(seed, t, i, "simulate"))
                return counting.summarize_each(data)

            sim_features = np.stack(parallel_map(simulate_one, n, cfg.threads))
            iter_calls += n * m
            m_marg = estimator.marginal_count(n, m)
            if m_marg > 0:
                rng_marg = rngmod.substream(seed, t, n, "marginal")
                thetas = prior.sample(rng_marg, size=m_marg)
                marginal_features = counting.summarize_each(
                    counting.simulate_batch(thetas, rng_marg)
                )
                iter_calls += m_marg

        ctx = EstimatorContext(
            particles=particles,
            prior=prior,
            proposal=proposal,
            observed_data=observed,
            observed_summary=obs_summary,
            sim_features=sim_features,
            marginal_features=marginal_features,
            threads=cfg.threads,
        )
        try:
            estimate = estimator.estimate(ctx)
            weights = normalize_weights(estimate.unnormalized)
        except DegenerateWeights as exc:
            partial = SamplerTrace(generations, records, t, cum_calls + iter_calls,
                                   seed, method=getattr(estimator, "name", ""))
            raise DegenerateWeights(
                f"all particle weights collapsed at iteration {t}: {exc}",
                iteration=t, trace=partial,
            ) from exc

        cum_calls += iter_calls
        generations.append(ParticleGeneration(particles, weights, t,
                                              _generation_cov(particles, weights)))
        records.append(_record(t, particles, weights, obs_summary, true_theta,
                               cum_calls, (time.perf_counter() - start) * 1000))
        means.append(records[-1].weighted_mean)
        if cfg.stop_threshold is not None and stopping_criterion(
                means, cfg.stop_window, cfg.stop_threshold):
            stopped_at = t
            break

    return SamplerTrace(
        generations=generations,
        records=records,
        stopped_at=stopped_at,
        total_simulator_calls=cum_calls,
        seed=seed,
        method=getattr(estimator, "name", "pmc"),
    )


def run_smc_abc(model, prior, cfg: SmcAbcConfig, observed,
                true_theta=None) -> SamplerTrace:
    """Sequential ABC with a fixed decreasing tolerance schedule.

    Generation t keeps resampling/perturbing/simulating until each of the N
    slots holds a particle whose summary lies within epsilon_t (Euclidean
    distance) of the observed summary. Every simulated dataset counts
    toward the budget, including rejected ones; proposals outside the prior
    support are rejected before simulating and cost no budget.
    """
    counting = model if isinstance(model, CallCountingModel) else CallCountingModel(model)
    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    obs_summary = counting.summarize(observed)
    n_obs = len(observed)
    n = cfg.num_particles
    d = counting.dim_theta
    seed = cfg.seed

    generations = []
    records = []
    distances = []
    cum_calls = 0

    for t, eps in enumerate(cfg.schedule, start=1):
        start = time.perf_counter()
        if t == 1:
            def accept_one(j):
                rng = rngmod.substream(seed, t, j, "attempt")
                for attempt in range(cfg.max_attempts_per_particle):
                    theta = prior.sample(rng)
                    data = counting.simulate(theta, n_obs, rng)
                    dist = float(np.linalg.norm(counting.summarize(data) - obs_summary))
                    if dist <= eps:
                        return theta, dist, attempt + 1
                raise AttemptsExhausted(
                    f"no acceptance within {cfg.max_attempts_per_particle} attempts "
                    f"at tolerance {eps}", epsilon=eps, iteration=t, particle=j)

            accepted = parallel_map(accept_one, n, cfg.threads)
            particles = np.vstack([a[0] for a in accepted])
            weights = np.full(n, 1.0 / n)
        else:
            prev = generations[-1]
            proposal = GaussianMixtureProposal(prev.particles, prev.weights, prev.proposal_cov)
            cum_w = np.cumsum(prev.weights)
            cum_w[-1] = 1.0
            chol = np.linalg.cholesky(prev.proposal_cov)

            def accept_one(j):
                rng = rngmod.substream(seed, t, j, "attempt")
                simulated = 0
                for _attempt in range(cfg.max_attempts_per_particle):
                    idx = int(np.searchsorted(cum_w, rng.random()))
                    theta = prev.particles[idx] + chol @ rng.standard_normal(d)
                    if prior.logpdf(theta) == -np.inf:
                        continue  # no simulation cost for out-of-prior proposals
                    data = counting.simulate(theta, n_obs, rng)
                    simulated += 1
                    dist = float(np.linalg.norm(counting.summarize(data) - obs_summary))
                    if dist <= eps:
                        return theta, dist, simulated
                raise AttemptsExhausted(
                    f"no acceptance within {cfg.max_attempts_per_particle} attempts "
                    f"at tolerance {eps}", epsilon=eps, iteration=t, particle=j)

            accepted = parallel_map(accept_one, n, cfg.threads)
            particles = np.vstack([a[0] for a in accepted])
            log_w = (prior.logpdf_many(particles)
                     - proposal.logpdf_many(particles))
            weights = normalize_weights(np.exp(log_w - log_w.max()))

        cum_calls += sum(a[2] for a in accepted) * n_obs
        generations.append(ParticleGeneration(particles, weights, t,
                                              _generation_cov(particles, weights)))
        distances.append(np.array([a[1] for a in accepted]))
        records.append(_record(t, particles, weights, obs_summary, true_theta,
                               cum_calls, (time.perf_counter() - start) * 1000))

    return SamplerTrace(
        generations=generations,
        records=records,
        stopped_at="max_iterations",
        total_simulator_calls=cum_calls,
        seed=seed,
        method="smc-abc",
        distances=distances,
    )


def write_generations_csv(trace: SamplerTrace, path) -> None:
    """iteration, particle, theta_1..theta_d, weight; one row per particle."""
    d = trace.generations[0].dim
    cols = ",".join(f"theta_{j + 1}" for j in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"iteration,particle,{cols},weight\n")
        for gen in trace.generations:
            for i in range(gen.num_particles):
                theta = ",".join(f"{v:.17g}" for v in gen.particles[i])
                fh.write(f"{gen.iteration},{i},{theta},{gen.weights[i]:.17g}\n")


def write_records_csv(trace: SamplerTrace, path) -> None:
    """Per-iteration metrics. Wall-clock times are deliberately not written
    here (they land in the run manifest) so that repeated runs with the
    same seed produce byte-identical CSVs."""
    d = trace.generations[0].dim
    cols = ",".join(f"mean_{j + 1}" for j in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"iteration,{cols},mse_vs_observation,rmse_vs_truth,ess,"
                 f"cumulative_sim_calls\n")
        for rec in trace.records:
            mean = ",".join(f"{v:.17g}" for v in rec.weighted_mean)
            rmse_txt = "" if rec.rmse_vs_truth is None else f"{rec.rmse_vs_truth:.17g}"
            fh.write(f"{rec.iteration},{mean},{rec.mse_vs_observation:.17g},"
                     f"{rmse_txt},{rec.ess:.17g},{rec.cumulative_sim_calls}\n")
