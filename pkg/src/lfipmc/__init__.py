"""Likelihood-free Bayesian inference via population Monte Carlo.

Particle weights come from one of three interchangeable estimators: a
multinomial classifier over all particles, per-particle binary ratio
estimation against prior-predictive draws, or the exact analytic oracle
available for the Gaussian benchmark. A tolerance-schedule SMC ABC sampler
serves as the baseline for budget comparisons.
"""

__version__ = "0.1.0"

from .classifier import (
    ClassifierModel,
    FitOptions,
    LabeledFeatures,
    fit_binary,
    fit_multinomial,
    predict_log_proba,
    predict_proba,
)
from .core import (
    GaussianMixtureProposal,
    ParticleGeneration,
    effective_sample_size,
    mixture_logpdf,
    multinomial_resample,
    mvn_logpdf,
    normalize_weights,
    weighted_covariance,
    weighted_mean,
)
from .evaluation import (
    ReplicateStudy,
    RunRecord,
    kl_divergence,
    mse,
    paired_t_statistic,
    rmse,
    run_replicate_study,
)
from .exceptions import (
    AttemptsExhausted,
    ConfigError,
    DegenerateWeights,
    DidNotConvergeWarning,
    EmptySeries,
    InferenceError,
    LengthMismatch,
    NotPositiveDefinite,
    ParseError,
    ValidationError,
    ZeroVariance,
)
from .models import (
    BoxUniformPrior,
    CallCountingModel,
    GaussianModel,
    SimulatorModel,
    exact_log_likelihood,
    gaussian_simulate,
    gaussian_summarize,
)
from .samplers import (
    PmcConfig,
    SamplerTrace,
    SmcAbcConfig,
    posterior_expectation,
    run_pmc,
    run_smc_abc,
    stopping_criterion,
)
from .weighting import (
    EstimatorContext,
    ExactOracle,
    LfireEstimator,
    MulticlassEstimator,
    WeightEstimate,
    exact_weights,
    lfire_weights,
    mcpmc_weights,
)
