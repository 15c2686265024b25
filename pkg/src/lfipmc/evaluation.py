"""Metrics and replicate studies for comparing weight estimators.

KL divergence between normalized weight vectors, MSE/RMSE against a target
vector, a paired t statistic with a quadrature-based two-sided p-value,
and the seeded replicate studies that drive the benchmark comparisons.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .classifier import FitOptions, LabeledFeatures, fit_binary, fit_multinomial
from .core import normalize_weights
from .exceptions import LengthMismatch, ZeroVariance
from .models import BoxUniformPrior, GaussianModel
from .weighting import (
    default_marginal_count,
    exact_weights,
    lfire_weights,
    mcpmc_weights,
)


@dataclass
class RunRecord:
    """Per-iteration sampler metrics."""

    iteration: int
    weighted_mean: np.ndarray
    mse_vs_observation: float
    rmse_vs_truth: float | None
    ess: float
    cumulative_sim_calls: int
    wall_ms: int


def kl_divergence(p, q, floor: float = 1e-12) -> float:
    """sum_i p_i ln(p_i / max(q_i, floor)) with 0 ln 0 := 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch("weight vectors must have the same length")
    if floor <= 0:
        raise ValueError("floor must be positive")
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(np.maximum(q[mask], floor)))))


def mse(estimate, target) -> float:
    """Mean squared error (1/d) sum_j (e_j - t_j)^2."""
    e = np.asarray(estimate, dtype=float)
    t = np.asarray(target, dtype=float)
    if e.shape != t.shape:
        raise LengthMismatch("vectors must have the same length")
    return float(np.mean((e - t) ** 2))


def rmse(estimate, target) -> float:
    """Root mean squared error, sqrt(mse)."""
    return math.sqrt(mse(estimate, target))


def paired_t_statistic(a, b):
    """Paired t statistic of a - b with (n-1)-normalized sd; returns (t, dof)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch("paired samples must have the same length")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0.0:
        raise ZeroVariance("all paired differences are identical")
    t = float(diff.mean() / (sd / math.sqrt(n)))
    return t, n - 1


def _adaptive_simpson(f, a, b, tol):
    """Adaptive Simpson quadrature of f on [a, b] to absolute tolerance."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f2, fm, whole, tol_here, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl = f(xl)
        fr = f(xr)
        left = simpson(x0, xm, f0, fl, fm)
        right = simpson(xm, x2, fm, fr, f2)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol_here:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, xm, f0, fm, fl, left, tol_here / 2.0, depth - 1)
                + recurse(xm, x2, fm, f2, fr, right, tol_here / 2.0, depth - 1))

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fb, fm, whole, tol, 50)


def student_t_pvalue_two_sided(t: float, dof: int, tol: float = 1e-8) -> float:
    """Two-sided p-value via adaptive Simpson quadrature on the t density."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    t = abs(float(t))
    if t == 0.0:
        return 1.0
    log_norm = (math.lgamma((dof + 1) / 2.0) - math.lgamma(dof / 2.0)
                - 0.5 * math.log(dof * math.pi))

    def density(x):
        return math.exp(log_norm - (dof + 1) / 2.0 * math.log1p(x * x / dof))

    central = _adaptive_simpson(density, -t, t, tol)
    return max(0.0, min(1.0, 1.0 - central))


def loglog_slope(sizes, values) -> float:
    """Least-squares slope of log(values) against log(sizes)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


@dataclass
class ReplicateStudy:
    """Weight-estimator comparison on shared per-replicate inputs.

    Each replicate draws one observed dataset and one particle set from the
    particle box; every method is evaluated on those same inputs, with KL
    divergence against the exact weights as the metric.
    """

    num_datasets: int
    num_particles: int
    sims_per_particle: int
    seed: int = 0
    methods: tuple = ("exact", "mcpmc", "lfire")
    true_mean: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    prior_low: float = -20.0
    prior_high: float = 20.0
    particle_low: float = -5.0
    particle_high: float = 5.0
    marginal_sims: int | None = None
    fit_options: FitOptions = field(default_factory=FitOptions)
    kl_direction: str = "exact-to-estimate"
    threads: int = 1

    def __post_init__(self):
        if self.num_datasets < 1:
            raise ValueError("num_datasets must be >= 1")
        if self.num_particles < 2:
            raise ValueError("num_particles must be >= 2")
        if self.sims_per_particle < 1:
            raise ValueError("sims_per_particle must be >= 1")
        if self.kl_direction not in ("exact-to-estimate", "estimate-to-exact"):
            raise ValueError("unknown kl_direction")
        unknown = set(self.methods) - {"exact", "mcpmc", "lfire"}
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


@dataclass
class StudyResult:
    """Long-format metric rows plus failure flags."""

    rows: list          # (replicate, method, metric, value)
    failed: list        # (replicate, method, message)

    def values(self, method: str, metric: str) -> np.ndarray:
        return np.array([v for (_, m, k, v) in self.rows if m == method and k == metric])

    def aggregate(self):
        """(method, metric, median, q25, q75) rows in first-seen order."""
        keys = []
        groups = {}
        for _, method, metric, value in self.rows:
            key = (method, metric)
            if key not in groups:
                groups[key] = []
                keys.append(key)
            groups[key].append(value)
        out = []
        for method, metric in keys:
            vals = np.array(groups[(method, metric)])
            q25, med, q75 = np.percentile(vals, [25.0, 50.0, 75.0])
            out.append((method, metric, float(med), float(q25), float(q75)))
        return out


def run_replicate_study(study: ReplicateStudy) -> StudyResult:
    """Run the weight-comparison study; per-replicate failures are flagged,
    not fatal. Deterministic given the study seed."""
    dim = len(study.true_mean)
    model = GaussianModel(dim=dim)
    prior = BoxUniformPrior.cube(study.prior_low, study.prior_high, dim)
    particle_box = BoxUniformPrior.cube(study.particle_low, study.particle_high, dim)
    true_mean = np.asarray(study.true_mean, dtype=float)
    n = study.num_particles
    m = study.sims_per_particle
    m_marg = study.marginal_sims or default_marginal_count(n, m)

    rows = []
    failed = []
    for r in range(study.num_datasets):
        observed = model.simulate(true_mean, 1, rngmod.substream(study.seed, r, 0, "observation"))
        obs_summary = model.summarize(observed)
        particles = particle_box.sample(rngmod.substream(study.seed, r, 0, "particles"), size=n)
        sim_features = np.stack([
            model.summarize_each(
                model.simulate(particles[i], m, rngmod.substream(study.seed, r, i, "simulate"))
            )
            for i in range(n)
        ])
        rng_marg = rngmod.substream(study.seed, r, n, "marginal")
        marg_thetas = prior.sample(rng_marg, size=m_marg)
        marginal_features = model.summarize_each(model.simulate_batch(marg_thetas, rng_marg))

        exact = normalize_weights(
            exact_weights(particles, observed, prior, particle_box).unnormalized
        )

        def kl_vs_exact(est_weights):
            approx = normalize_weights(est_weights)
            if study.kl_direction == "exact-to-estimate":
                return kl_divergence(exact, approx)
            return kl_divergence(approx, exact)

        for method in study.methods:
            try:
                start = time.perf_counter()
                if method == "exact":
                    est = exact_weights(particles, observed, prior, particle_box)
                elif method == "mcpmc":
                    est = mcpmc_weights(particles, sim_features, obs_summary,
                                        prior, particle_box, study.fit_options)
                else:
                    est = lfire_weights(particles, sim_features, marginal_features,
                                        obs_summary, prior, particle_box,
                                        study.fit_options, study.threads)
                elapsed = time.perf_counter() - start
                rows.append((r, method, "kl", kl_vs_exact(est.unnormalized)))
                rows.append((r, method, "fit_seconds", est.fit_seconds))
                rows.append((r, method, "wall_seconds", elapsed))
                rows.append((r, method, "simulator_calls", float(est.simulator_calls_used)))
            except Exception as exc:  # noqa: BLE001 - study must survive per-replicate failures
                failed.append((r, method, f"{type(exc).__name__}: {exc}"))
                rows.append((r, method, "error", float("nan")))
    return StudyResult(rows=rows, failed=failed)


def classifier_time_study(particle_counts, sims_per_particle, repeats: int = 3,
                          seed: int = 0, marginal_sims: int | None = None,
                          fit_options: FitOptions | None = None):
    """Median fit wall time per particle count for both classifier schemes.

    The multi-class scheme trains one softmax model over all particles; the
    ratio scheme trains one binary model per particle against a marginal
    sample of fixed size (``sims_per_particle`` unless given), so its total
    cost is the sum of the per-particle fits.

    Returns ``{"mcpmc": [(n, seconds), ...], "lfire": [...]}``.
    """
    fit_options = fit_options or FitOptions()
    dim = 5
    model = GaussianModel(dim=dim)
    box = BoxUniformPrior.cube(-5.0, 5.0, dim)
    m = sims_per_particle
    result = {"mcpmc": [], "lfire": []}
    for n in particle_counts:
        m_marg = marginal_sims or m
        mc_times = []
        lf_times = []
        for rep in range(repeats):
            particles = box.sample(rngmod.substream(seed, n, rep, "particles"), size=n)
            sims = np.stack([
                model.simulate(particles[i], m, rngmod.substream(seed, n, rep * n + i, "simulate"))
                for i in range(n)
            ])
            rng_marg = rngmod.substream(seed, n, rep, "marginal")
            marg = model.simulate_batch(
                BoxUniformPrior.cube(-20.0, 20.0, dim).sample(rng_marg, size=m_marg), rng_marg
            )
            labels_mc = np.repeat(np.arange(n), m)
            start = time.perf_counter()
            fit_multinomial(LabeledFeatures(sims.reshape(n * m, dim), labels_mc), fit_options)
            mc_times.append(time.perf_counter() - start)

            labels_bin = np.concatenate([np.zeros(m_marg, dtype=int), np.ones(m, dtype=int)])
            start = time.perf_counter()
            for i in range(n):
                fit_binary(LabeledFeatures(np.vstack([marg, sims[i]]), labels_bin), fit_options)
            lf_times.append(time.perf_counter() - start)
        result["mcpmc"].append((n, float(np.median(mc_times))))
        result["lfire"].append((n, float(np.median(lf_times))))
    return result


def write_metrics_csv(rows, path) -> None:
    """Long-format metric rows: replicate, method, metric, value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("replicate,method,metric,value\n")
        for replicate, method, metric, value in rows:
            fh.write(f"{replicate},{method},{metric},{value:.17g}\n")


def write_summary_csv(aggregate_rows, path) -> None:
    """Aggregate rows: method, metric, median, q25, q75."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,metric,median,q25,q75\n")
        for method, metric, med, q25, q75 in aggregate_rows:
            fh.write(f"{method},{metric},{med:.17g},{q25:.17g},{q75:.17g}\n")


def read_metrics_csv(path):
    """Inverse of :func:`write_metrics_csv`."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "replicate,method,metric,value":
            raise ValueError(f"unexpected metrics header: {header!r}")
        for line in fh:
            replicate, method, metric, value = line.rstrip("\n").split(",")
            rows.append((int(replicate), method, metric, float(value)))
    return rows
