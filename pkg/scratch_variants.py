"""Scratch: compare PMC dynamics variants for the exact-weight oracle."""
import numpy as np
from lfipmc.models import BoxUniformPrior, GaussianModel, exact_log_likelihood_many
from lfipmc.core import GaussianMixtureProposal, ensure_spd, weighted_covariance, weighted_mean
from lfipmc import rng as rngmod
from scipy.special import logsumexp
from scipy.linalg import solve_triangular

LOG2PI = np.log(2 * np.pi)


def run_variant(seed, obs, variant, N=50, T=10, reproposal=False):
    model = GaussianModel(5)
    prior = BoxUniformPrior.cube(-20, 20, 5)
    d = 5
    particles = np.vstack([prior.sample(rngmod.substream(seed, 1, i, "init")) for i in range(N)])
    weights = np.full(N, 1.0 / N)
    mses = []
    obs_sum = obs[0]
    mses.append(np.mean((weights @ particles - obs_sum) ** 2))
    cov = ensure_spd(2 * weighted_covariance(particles, weights)[0])
    for t in range(2, T + 1):
        cum = np.cumsum(weights); cum[-1] = 1.0
        chol = np.linalg.cholesky(cov)
        prev = particles.copy()
        prev_w = weights.copy()
        anc = np.empty(N, dtype=int)
        newp = np.empty_like(particles)
        for i in range(N):
            r1 = rngmod.substream(seed, t, i, "resample")
            r2 = rngmod.substream(seed, t, i, "perturb")
            while True:
                idx = int(np.searchsorted(cum, r1.random()))
                cand = prev[idx] + chol @ r2.standard_normal(d)
                if not reproposal or prior.logpdf(cand) > -np.inf:
                    break
            anc[i] = idx
            newp[i] = cand
        particles = newp
        loglik = exact_log_likelihood_many(particles, obs)
        logprior = prior.logpdf_many(particles)
        if variant == "mixture":
            prop = GaussianMixtureProposal(prev, prev_w, cov)
            logq = prop.logpdf_many(particles)
        else:  # per-ancestor kernel
            diff = particles - prev[anc]
            z = solve_triangular(chol, diff.T, lower=True)
            logq = -0.5 * (d * LOG2PI + 2 * np.sum(np.log(np.diag(chol))) + np.sum(z * z, axis=0))
        logw = loglik + logprior - logq
        w = np.zeros(N)
        ok = logprior > -np.inf
        w[ok] = np.exp(logw[ok] - logw[ok].max())
        weights = w / w.sum()
        mses.append(np.mean((weights @ particles - obs_sum) ** 2))
        cov = ensure_spd(2 * weighted_covariance(particles, weights)[0])
    return mses


model = GaussianModel(5)
for variant, reprop in [("mixture", False), ("mixture", True), ("ancestor", False), ("ancestor", True)]:
    wins = 0
    finals = []
    for seed in range(20):
        obs = model.simulate(np.array([1., 2., 3., 4., 5.]), 1, rngmod.substream(seed, 0, 0, "observation"))
        mses = run_variant(seed, obs, variant, reproposal=reprop)
        wins += mses[-1] < mses[0]
        finals.append(mses[-1])
    print(f"{variant:9s} reproposal={reprop}: wins {wins}/20  median final {np.median(finals):8.2f}")
