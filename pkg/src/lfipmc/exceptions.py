"""Exception and warning types shared across the package."""


class InferenceError(Exception):
    """Base class for all package-specific errors."""


class DegenerateWeights(InferenceError):
    """Every particle weight collapsed to zero.

    When raised inside a sampler the exception carries the iteration at
    which the collapse happened and the trace accumulated so far, so the
    caller can inspect the run up to the failure.
    """

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class NotPositiveDefinite(InferenceError):
    """Covariance factorization failed even after ridge regularization."""


class AttemptsExhausted(InferenceError):
    """A rejection loop hit its attempt cap before accepting a particle."""

    def __init__(self, message, epsilon=None, iteration=None, particle=None):
        super().__init__(message)
        self.epsilon = epsilon
        self.iteration = iteration
        self.particle = particle


class LengthMismatch(InferenceError, ValueError):
    """Vector arguments that must share a length do not."""


class ZeroVariance(InferenceError):
    """All paired differences are identical; the t statistic is undefined."""


class EmptySeries(InferenceError):
    """A plot was requested for empty data."""


class ConfigError(InferenceError):
    """Base class for configuration problems (parse or validation)."""


class ParseError(ConfigError):
    """The configuration document is not syntactically valid."""


class ValidationError(ConfigError):
    """The configuration parsed but violates one or more constraints.

    ``problems`` lists every violated constraint, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DidNotConvergeWarning(UserWarning):
    """A classifier fit stopped at its iteration cap before converging."""
