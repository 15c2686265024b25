"""Particle-system primitives shared by every sampler.

Weight normalization, resampling, weighted moments, Gaussian log densities
and the adaptive Gaussian-mixture proposal. All functions are pure given
their inputs plus an explicit RNG, so they can run concurrently on
disjoint substreams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .exceptions import DegenerateWeights, NotPositiveDefinite

LOG_2PI = float(np.log(2.0 * np.pi))

#: smallest-eigenvalue threshold below which a covariance is flagged singular
SINGULAR_EIGENVALUE_TOL = 1e-10

#: ridge factor applied (scaled by trace/d) when a Cholesky factorization fails
RIDGE_SCALE = 1e-8


def _as_weights(w, normalized=True):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be a 1-D vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if normalized and abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be normalized")
    return w


def normalize_weights(raw) -> np.ndarray:
    """Scale a non-negative weight vector to sum to one.

    Raises
    ------
    DegenerateWeights
        If every entry is zero (total particle collapse).
    """
    w = _as_weights(raw, normalized=False)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWeights("all weights are zero")
    return w / total


def effective_sample_size(w) -> float:
    """Return 1 / sum(w_i^2) for a normalized weight vector; lies in [1, N]."""
    w = _as_weights(w)
    return float(1.0 / np.sum(w * w))


def weighted_mean(particles, w) -> np.ndarray:
    """Componentwise weighted mean sum_i w_i theta_i of an (N, d) particle array."""
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    w = _as_weights(w)
    if len(particles) != len(w):
        raise ValueError("particles and weights must have the same length")
    return w @ particles


def weighted_covariance(particles, w):
    """Weighted empirical covariance sum_i w_i (theta_i - mean)(theta_i - mean)^T.

    No bias correction is applied; with uniform weights this is the
    1/N-normalized population covariance.

    Returns
    -------
    (cov, singular) : (ndarray, bool)
        ``singular`` flags a smallest eigenvalue below
        :data:`SINGULAR_EIGENVALUE_TOL`; the caller must regularize
        (see :func:`ensure_spd`) before factorizing.
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    w = _as_weights(w)
    if len(particles) < 2:
        raise ValueError("need at least 2 particles for a covariance")
    if len(particles) != len(w):
        raise ValueError("particles and weights must have the same length")
    mu = w @ particles
    diff = particles - mu
    cov = (w[:, None] * diff).T @ diff
    cov = 0.5 * (cov + cov.T)
    eigmin = float(np.linalg.eigvalsh(cov)[0])
    return cov, eigmin < SINGULAR_EIGENVALUE_TOL


def multinomial_resample_indices(w, count, rng) -> np.ndarray:
    """Draw ``count`` ancestor indices i.i.d. from the categorical given by ``w``."""
    w = _as_weights(w)
    if count < 1:
        raise ValueError("count must be >= 1")
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(count), side="left")


def multinomial_resample(particles, w, count, rng) -> np.ndarray:
    """Resample ``count`` particles i.i.d. by weight; deterministic given ``rng``."""
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    idx = multinomial_resample_indices(w, count, rng)
    return particles[idx].copy()


def ensure_spd(cov) -> np.ndarray:
    """Return ``cov`` (symmetrized), ridged once if its Cholesky fails.

    The ridge is ``RIDGE_SCALE * trace(cov)/d`` on the diagonal. Raises
    :class:`NotPositiveDefinite` if the matrix still does not factor.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        pass
    d = cov.shape[0]
    # the absolute floor keeps a fully collapsed (zero-trace) matrix factorable
    ridge = RIDGE_SCALE * max(np.trace(cov) / d, 1.0)
    ridged = cov + ridge * np.eye(d)
    try:
        np.linalg.cholesky(ridged)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "covariance is not positive definite even after ridge regularization"
        ) from exc
    return ridged


def spd_cholesky(cov) -> np.ndarray:
    """Lower Cholesky factor of ``cov`` after :func:`ensure_spd`."""
    return np.linalg.cholesky(ensure_spd(cov))


def mvn_logpdf(x, mean, cov) -> float:
    """log N(x | mean, cov) via Cholesky factorization."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    L = spd_cholesky(cov)
    z = solve_triangular(L, x - mean, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (x.size * LOG_2PI + logdet + z @ z))


def _component_logpdfs(X, means, chol_lower):
    """(n, K) matrix of log N(x_i | mean_k, cov) given the shared Cholesky factor."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    means = np.atleast_2d(np.asarray(means, dtype=float))
    n, d = X.shape
    k = len(means)
    diff = (X[:, None, :] - means[None, :, :]).reshape(n * k, d)
    z = solve_triangular(chol_lower, diff.T, lower=True)
    sq = np.sum(z * z, axis=0).reshape(n, k)
    logdet = 2.0 * np.sum(np.log(np.diag(chol_lower)))
    return -0.5 * (d * LOG_2PI + logdet + sq)


@dataclass
class GaussianMixtureProposal:
    """Equal-covariance Gaussian mixture q(theta) = sum_k w_k N(theta | mean_k, cov).

    This is the adaptive proposal used by the particle samplers: component
    means are the previous generation's particles and mixture weights are
    their normalized importance weights.
    """

    means: np.ndarray
    mixture_weights: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.mixture_weights = _as_weights(self.mixture_weights)
        if len(self.means) != len(self.mixture_weights):
            raise ValueError("means and mixture_weights must have the same length")
        self.cov = ensure_spd(self.cov)
        self._chol = np.linalg.cholesky(self.cov)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def logpdf_many(self, X) -> np.ndarray:
        """Vectorized log q over the rows of ``X``, with a log-sum-exp guard."""
        comp = _component_logpdfs(X, self.means, self._chol)
        return logsumexp(comp, axis=1, b=self.mixture_weights[None, :])

    def logpdf(self, x) -> float:
        return float(self.logpdf_many(np.atleast_2d(x))[0])

    def sample(self, count, rng) -> np.ndarray:
        idx = multinomial_resample_indices(self.mixture_weights, count, rng)
        noise = rng.standard_normal((count, self.dim)) @ self._chol.T
        return self.means[idx] + noise


def mixture_logpdf(proposal, x) -> float:
    """log q(x) for any proposal exposing ``logpdf_many`` (scalar convenience)."""
    return float(np.asarray(proposal.logpdf_many(np.atleast_2d(x)))[0])


@dataclass
class ParticleGeneration:
    """One sampler iteration: particles, normalized weights and the proposal
    covariance (tau^2) computed from them for the next iteration."""

    particles: np.ndarray
    weights: np.ndarray
    iteration: int
    proposal_cov: np.ndarray

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.particles) != len(self.weights):
            raise ValueError("particles and weights must have the same length")
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("generation weights must be normalized to 1e-12")
        cov = np.asarray(self.proposal_cov, dtype=float)
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("proposal covariance must be symmetric to 1e-10")
        self.proposal_cov = cov

    @property
    def num_particles(self) -> int:
        return len(self.particles)

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def ess(self) -> float:
        return effective_sample_size(self.weights)

    def mean(self) -> np.ndarray:
        return weighted_mean(self.particles, self.weights)
