"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
that pipelines can distinguish, say, a short sample from a degenerate one
without string matching.  All types derive from :class:`RetlabError`.
"""


class RetlabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RetlabError):
    """Input violates a documented precondition (bad shape, bad value, bad config)."""


class ParseError(ValidationError):
    """A text input (CSV file or config file) could not be parsed.

    Messages name the file and the 1-based line number of the offending row.
    """


class GapError(ValidationError):
    """A monthly grid has a hole: some month in the span carries no value."""


class LengthError(ValidationError):
    """A series is shorter than the operation requires."""


class AlignmentError(RetlabError):
    """Two series (or a panel) do not share the required common sample."""


class InsufficientDataError(RetlabError):
    """Too few observations for the requested statistic."""


class DegenerateVarianceError(RetlabError):
    """A variance needed in a denominator is zero (constant series)."""


class SingularDenominatorError(RetlabError):
    """A scalar denominator is numerically zero (e.g. 1 + 2*rho in a thin-trading beta)."""


class SingularDesignError(RetlabError):
    """A regression design matrix is rank deficient (collinear columns)."""


class InsufficientTailError(RetlabError):
    """Too few threshold exceedances to fit a tail model."""


class OutOfTailError(RetlabError):
    """A requested fractile falls at or below the fitted tail threshold."""


class InfiniteMeanError(RetlabError):
    """A tail mean is requested from a fitted tail with nonfinite first moment."""


class DecompositionError(RetlabError):
    """A matrix factorization required by the computation does not exist
    (e.g. a residual covariance that is not positive definite)."""


class ConvergenceError(RetlabError):
    """An iterative fit failed to converge within its iteration budget."""
