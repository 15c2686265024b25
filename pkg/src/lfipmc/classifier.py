"""Penalized binary and multinomial logistic regression.

The optimizer is proximal gradient descent on the smooth mean negative
log-likelihood with a soft-threshold step for the L1 term and a
backtracking line search. Intercepts are never penalized. Features are
standardized internally and coefficients back-transformed on output, so
the penalty is scale-free while the model predicts on raw features.
Fits are deterministic: initialization is fixed at zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import DidNotConvergeWarning


@dataclass
class FitOptions:
    """Optimizer settings for the logistic fits."""

    l1_strength: float = 0.0
    max_iterations: int = 500
    tolerance: float = 1e-8          # relative objective decrease
    backtrack_factor: float = 0.5
    quadratic_features: bool = False  # append x_j * x_k (j <= k) to the features

    def __post_init__(self):
        if self.l1_strength < 0:
            raise ValueError("l1_strength must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.tolerance:
            raise ValueError("tolerance must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class LabeledFeatures:
    """Training set: (m, s) feature rows with integer class labels 0..C-1."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int)
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise ValueError("labels must be a vector matching the feature rows")
        if self.labels.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")
        counts = np.bincount(self.labels)
        if len(counts) < 2:
            raise ValueError("need at least 2 classes")
        if np.any(counts == 0):
            raise ValueError("every class 0..C-1 must appear at least once")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass
class ClassifierModel:
    """Fitted model: (C, s_eff + 1) coefficient matrix, intercepts in column 0.

    Coefficients act on raw (optionally quadratic-expanded) features.
    ``converged`` is False when the fit stopped at ``max_iterations``; the
    best iterate is still returned.
    """

    coefficients: np.ndarray
    num_classes: int
    l1_strength: float
    class_counts: np.ndarray
    converged: bool = True
    n_iterations: int = 0
    quadratic_features: bool = False
    num_features: int = 0             # raw feature count before expansion
    objective_trace: np.ndarray = field(default=None, repr=False)


def expand_quadratic(X) -> np.ndarray:
    """Append all degree-2 monomials x_j * x_k (j <= k) to the feature columns."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = [X]
    s = X.shape[1]
    for j in range(s):
        cols.append(X[:, j:j + 1] * X[:, j:])
    return np.hstack(cols)


def soft_threshold(values, amount) -> np.ndarray:
    """Elementwise sign(v) * max(|v| - amount, 0); yields exact zeros."""
    return np.sign(values) * np.maximum(np.abs(values) - amount, 0.0)


def multinomial_nll(coefficients, features, labels) -> float:
    """Mean negative log-likelihood of the softmax model (the smooth objective part)."""
    Z = np.hstack([np.ones((len(features), 1)), np.atleast_2d(features)])
    scores = Z @ np.asarray(coefficients, dtype=float).T
    lse = logsumexp(scores, axis=1)
    picked = scores[np.arange(len(labels)), np.asarray(labels, dtype=int)]
    return float(np.mean(lse - picked))


def multinomial_nll_grad(coefficients, features, labels) -> np.ndarray:
    """Analytic gradient of :func:`multinomial_nll` with respect to the coefficients."""
    features = np.atleast_2d(features)
    labels = np.asarray(labels, dtype=int)
    m = len(features)
    Z = np.hstack([np.ones((m, 1)), features])
    scores = Z @ np.asarray(coefficients, dtype=float).T
    P = np.exp(scores - logsumexp(scores, axis=1)[:, None])
    Y = np.zeros_like(P)
    Y[np.arange(m), labels] = 1.0
    return (P - Y).T @ Z / m


def _penalty(B, lam) -> float:
    return float(lam * np.abs(B[:, 1:]).sum()) if lam > 0 else 0.0


def _fit_softmax(Z, labels, num_classes, lam, opts):
    """Proximal gradient on the penalized softmax objective; Z carries the
    intercept column. Returns (B, trace, converged, iterations)."""
    m, p = Z.shape
    Y = np.zeros((m, num_classes))
    Y[np.arange(m), labels] = 1.0
    YtZ = Y.T @ Z / m
    rows = np.arange(m)

    B = np.zeros((num_classes, p))
    sigma_sq = np.linalg.norm(Z, 2) ** 2
    step = 2.0 * m / sigma_sq  # 1/L for the softmax Hessian bound L = sigma^2 / (2m)

    scores = Z @ B.T
    lse = logsumexp(scores, axis=1)
    nll = float(np.mean(lse) - np.mean(scores[rows, labels]))
    P = np.exp(scores - lse[:, None])
    obj = nll + _penalty(B, lam)
    trace = [obj]
    converged = False
    iterations = 0

    for _ in range(opts.max_iterations):
        iterations += 1
        grad = P.T @ Z / m - YtZ
        while True:
            Bn = B - step * grad
            if lam > 0:
                Bn[:, 1:] = soft_threshold(Bn[:, 1:], lam * step)
            scores_n = Z @ Bn.T
            lse_n = logsumexp(scores_n, axis=1)
            nll_n = float(np.mean(lse_n) - np.mean(scores_n[rows, labels]))
            diff = Bn - B
            bound = nll + float(np.sum(grad * diff)) + float(np.sum(diff * diff)) / (2 * step)
            if nll_n <= bound + 1e-12 * (1.0 + abs(nll)) or step < 1e-18:
                break
            step *= opts.backtrack_factor
        obj_n = nll_n + _penalty(Bn, lam)
        trace.append(obj_n)
        B = Bn
        nll = nll_n
        P = np.exp(scores_n - lse_n[:, None])
        decrease = obj - obj_n
        obj = obj_n
        if decrease <= opts.tolerance * abs(obj) + 1e-300:
            converged = True
            break

    return B, np.asarray(trace), converged, iterations


def _fit_logistic(Z, labels, lam, opts):
    """Binary specialization: a single coefficient row for the score difference.

    Equivalent to the two-row softmax problem (the optimum and the whole
    proximal trajectory coincide under the induced step scaling).
    """
    m, p = Z.shape
    y = labels.astype(float)

    w = np.zeros(p)
    sigma_sq = np.linalg.norm(Z, 2) ** 2
    step = 4.0 * m / sigma_sq  # 1/L for the sigmoid Hessian bound L = sigma^2 / (4m)

    scores = Z @ w
    nll = float(np.mean(np.logaddexp(0.0, scores) - y * scores))
    p1 = 1.0 / (1.0 + np.exp(-scores))
    obj = nll + (lam * np.abs(w[1:]).sum() if lam > 0 else 0.0)
    trace = [obj]
    converged = False
    iterations = 0

    for _ in range(opts.max_iterations):
        iterations += 1
        grad = Z.T @ (p1 - y) / m
        while True:
            wn = w - step * grad
            if lam > 0:
                wn[1:] = soft_threshold(wn[1:], lam * step)
            scores_n = Z @ wn
            nll_n = float(np.mean(np.logaddexp(0.0, scores_n) - y * scores_n))
            diff = wn - w
            bound = nll + float(grad @ diff) + float(diff @ diff) / (2 * step)
            if nll_n <= bound + 1e-12 * (1.0 + abs(nll)) or step < 1e-18:
                break
            step *= opts.backtrack_factor
        obj_n = nll_n + (lam * np.abs(wn[1:]).sum() if lam > 0 else 0.0)
        trace.append(obj_n)
        w = wn
        nll = nll_n
        p1 = 1.0 / (1.0 + np.exp(-scores_n))
        decrease = obj - obj_n
        obj = obj_n
        if decrease <= opts.tolerance * abs(obj) + 1e-300:
            converged = True
            break

    # symmetric two-row representation, matching what the softmax path yields
    B = np.vstack([-0.5 * w, 0.5 * w])
    return B, np.asarray(trace), converged, iterations


def _prepare_design(features, opts):
    X = expand_quadratic(features) if opts.quadratic_features else np.atleast_2d(features)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    Z = np.hstack([np.ones((len(X), 1)), (X - mu) / sd])
    return Z, mu, sd


def _back_transform(B_std, mu, sd):
    coef = np.empty_like(B_std)
    coef[:, 1:] = B_std[:, 1:] / sd
    coef[:, 0] = B_std[:, 0] - coef[:, 1:] @ mu
    return coef


def fit_multinomial(data: LabeledFeatures, opts: FitOptions | None = None) -> ClassifierModel:
    """Fit a multinomial logistic regression minimizing
    mean NLL + l1_strength * sum |non-intercept coefficients|."""
    opts = opts or FitOptions()
    Z, mu, sd = _prepare_design(data.features, opts)
    B_std, trace, converged, iters = _fit_softmax(
        Z, data.labels, data.num_classes, opts.l1_strength, opts
    )
    if not converged:
        warnings.warn(
            f"fit stopped at max_iterations={opts.max_iterations} before reaching "
            f"tolerance={opts.tolerance}",
            DidNotConvergeWarning,
            stacklevel=2,
        )
    return ClassifierModel(
        coefficients=_back_transform(B_std, mu, sd),
        num_classes=data.num_classes,
        l1_strength=opts.l1_strength,
        class_counts=data.class_counts,
        converged=converged,
        n_iterations=iters,
        quadratic_features=opts.quadratic_features,
        num_features=data.features.shape[1],
        objective_trace=trace,
    )


def fit_binary(data: LabeledFeatures, opts: FitOptions | None = None) -> ClassifierModel:
    """fit_multinomial specialized to two classes (single-row sigmoid fit)."""
    if data.num_classes != 2:
        raise ValueError("fit_binary requires exactly 2 classes")
    opts = opts or FitOptions()
    Z, mu, sd = _prepare_design(data.features, opts)
    B_std, trace, converged, iters = _fit_logistic(Z, data.labels, opts.l1_strength, opts)
    if not converged:
        warnings.warn(
            f"fit stopped at max_iterations={opts.max_iterations} before reaching "
            f"tolerance={opts.tolerance}",
            DidNotConvergeWarning,
            stacklevel=2,
        )
    return ClassifierModel(
        coefficients=_back_transform(B_std, mu, sd),
        num_classes=2,
        l1_strength=opts.l1_strength,
        class_counts=data.class_counts,
        converged=converged,
        n_iterations=iters,
        quadratic_features=opts.quadratic_features,
        num_features=data.features.shape[1],
        objective_trace=trace,
    )


def decision_scores(model: ClassifierModel, x) -> np.ndarray:
    """Raw class scores for one (s,) vector or an (n, s) batch."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != model.num_features:
        raise ValueError(f"expected {model.num_features} features, got {X.shape[1]}")
    if model.quadratic_features:
        X = expand_quadratic(X)
    return model.coefficients[:, 0] + X @ model.coefficients[:, 1:].T


def predict_log_proba(model: ClassifierModel, x) -> np.ndarray:
    """Log class probabilities (log-softmax of the scores)."""
    scores = decision_scores(model, x)
    out = scores - logsumexp(scores, axis=1)[:, None]
    if np.asarray(x).ndim == 1:
        return out[0]
    return out


def predict_proba(model: ClassifierModel, x) -> np.ndarray:
    """Class probabilities; strictly positive and summing to one per row."""
    scores = decision_scores(model, x)
    p = np.exp(scores - logsumexp(scores, axis=1)[:, None])
    p = np.clip(p, 1e-300, None)
    p /= p.sum(axis=1)[:, None]
    if np.asarray(x).ndim == 1:
        return p[0]
    return p


def l1_critical_strength(data: LabeledFeatures) -> float:
    """Smallest penalty that zeroes every non-intercept coefficient.

    Computed as the max absolute smooth-gradient entry of the intercept-only
    (null) model with intercepts at the log class frequencies, evaluated on
    the internally standardized features.
    """
    opts = FitOptions()
    Z, _, _ = _prepare_design(data.features, opts)
    C = data.num_classes
    freq = data.class_counts / len(data.labels)
    B0 = np.zeros((C, Z.shape[1]))
    B0[:, 0] = np.log(freq)
    m = len(data.labels)
    Y = np.zeros((m, C))
    Y[np.arange(m), data.labels] = 1.0
    scores = Z @ B0.T
    P = np.exp(scores - logsumexp(scores, axis=1)[:, None])
    grad = (P - Y).T @ Z / m
    return float(np.abs(grad[:, 1:]).max())
