"""Simulator and prior abstractions plus the Gaussian benchmark model.

The benchmark is a d-dimensional Gaussian with identity covariance and a
box-uniform prior on the mean. Its likelihood is available in closed form,
which is what makes an exact-weight oracle possible for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LOG_2PI


class SimulatorModel:
    """Interface for stochastic simulators used by the samplers.

    Subclasses must set ``dim_theta`` and ``dim_summary`` and implement
    :meth:`simulate` and :meth:`summarize`. ``simulate`` must be a pure
    function of ``(theta, n, rng state)``.
    """

    dim_theta: int
    dim_summary: int

    def simulate(self, theta, n, rng) -> np.ndarray:
        """Draw ``n`` replicate rows from p(. | theta); returns an (n, p) array."""
        raise NotImplementedError

    def simulate_batch(self, thetas, rng) -> np.ndarray:
        """One replicate row per parameter vector; returns (len(thetas), p)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.vstack([self.simulate(t, 1, rng) for t in thetas])

    def summarize(self, data) -> np.ndarray:
        """Summary statistic vector of a whole dataset; returns (s,)."""
        raise NotImplementedError

    def summarize_each(self, data) -> np.ndarray:
        """Summary of each row treated as its own single-replicate dataset."""
        data = np.atleast_2d(np.asarray(data, dtype=float))
        return np.vstack([self.summarize(row[None, :]) for row in data])


class GaussianModel(SimulatorModel):
    """N(theta, I_d) simulator with sample means as summary statistics."""

    def __init__(self, dim: int = 5):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.dim_theta = dim
        self.dim_summary = dim

    def simulate(self, theta, n, rng) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have shape ({self.dim},)")
        if n < 1:
            raise ValueError("n must be >= 1")
        return theta + rng.standard_normal((n, self.dim))

    def simulate_batch(self, thetas, rng) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return thetas + rng.standard_normal(thetas.shape)

    def summarize(self, data) -> np.ndarray:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        return data.mean(axis=0)

    def summarize_each(self, data) -> np.ndarray:
        # the summary of a single row is the row itself
        return np.atleast_2d(np.asarray(data, dtype=float))


class CallCountingModel(SimulatorModel):
    """Wrapper counting every simulated replicate row, for budget accounting."""

    def __init__(self, model: SimulatorModel):
        self.model = model
        self.dim_theta = model.dim_theta
        self.dim_summary = model.dim_summary
        self.calls = 0

    def reset(self):
        self.calls = 0

    def simulate(self, theta, n, rng):
        self.calls += int(n)
        return self.model.simulate(theta, n, rng)

    def simulate_batch(self, thetas, rng):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        self.calls += len(thetas)
        return self.model.simulate_batch(thetas, rng)

    def summarize(self, data):
        return self.model.summarize(data)

    def summarize_each(self, data):
        return self.model.summarize_each(data)


def gaussian_simulate(theta, n, rng, model: GaussianModel | None = None) -> np.ndarray:
    """Draw ``n`` i.i.d. rows from N(theta, I)."""
    theta = np.asarray(theta, dtype=float)
    model = model or GaussianModel(dim=theta.size)
    return model.simulate(theta, n, rng)


def gaussian_summarize(data) -> np.ndarray:
    """Column means of a dataset (the benchmark summary statistic)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.size == 0:
        raise ValueError("dataset must be non-empty")
    return data.mean(axis=0)


def exact_log_likelihood(theta, data) -> float:
    """Closed-form log likelihood of ``data`` rows under N(theta, I)."""
    theta = np.asarray(theta, dtype=float)
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if theta.shape != (d,):
        raise ValueError("theta dimension must match the data columns")
    sq = float(np.sum((data - theta) ** 2))
    return -0.5 * (n * d * LOG_2PI + sq)


def exact_log_likelihood_many(thetas, data) -> np.ndarray:
    """Vectorized :func:`exact_log_likelihood` over rows of ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    row_sq = float(np.sum(data * data))
    col_sum = data.sum(axis=0)
    sq = row_sq - 2.0 * thetas @ col_sum + n * np.sum(thetas * thetas, axis=1)
    return -0.5 * (n * d * LOG_2PI + sq)


@dataclass
class BoxUniformPrior:
    """Uniform prior on the closed box [lower, upper]^d (componentwise bounds)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must have the same shape")
        if not np.all(self.lower < self.upper):
            raise ValueError("lower must be strictly below upper componentwise")

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "BoxUniformPrior":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def log_volume(self) -> float:
        return float(np.sum(np.log(self.upper - self.lower)))

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        if size is None:
            return rng.uniform(self.lower, self.upper)
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def logpdf(self, theta) -> float:
        return float(self.logpdf_many(np.atleast_2d(theta))[0])

    def logpdf_many(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        inside = np.all((thetas >= self.lower) & (thetas <= self.upper), axis=1)
        out = np.full(len(thetas), -np.inf)
        out[inside] = -self.log_volume
        return out


def write_dataset_csv(path, data) -> None:
    """Write a dataset as CSV, one replicate row per line, no header."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    np.savetxt(path, data, delimiter=",", fmt="%.17g")


def read_dataset_csv(path) -> np.ndarray:
    """Read a dataset written by :func:`write_dataset_csv`."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"dataset file {path} is empty")
    return data
