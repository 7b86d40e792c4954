"""Exception types shared across the library."""


class CepmcError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(CepmcError):
    """Covariance factorization failed; the matrix is singular or indefinite."""


class AllWeightsZero(CepmcError):
    """A weight vector carries no positive mass."""


class NonFiniteWeight(CepmcError):
    """Importance weights overflowed or produced NaN.

    Carries diagnostics: indices of the offending samples and the log-space
    quantities that produced them.
    """

    def __init__(self, message, bad_indices=None, log_numerator=None, log_denominator=None):
        super().__init__(message)
        self.bad_indices = bad_indices
        self.log_numerator = log_numerator
        self.log_denominator = log_denominator


class EmptyBatch(CepmcError):
    """An operation that needs at least one sample received none."""


class MaxIterationsExceeded(CepmcError):
    """The level schedule failed to reach the target threshold in time.

    The partial trace accumulated so far is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoConvergence(CepmcError):
    """An iterative root solve did not meet its residual tolerance."""


class ConfigError(CepmcError):
    """An experiment configuration file is malformed or inconsistent."""
