"""Exception hierarchy shared by all clsbp modules.

Three families matter to callers: data/validation problems, numerical
failures inside the sampler or estimand solvers, and missing artifacts on
disk. The CLI maps these onto exit codes 2, 3, and 4 respectively.
"""


class ClsbpError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ClsbpError):
    """Input data or configuration violates a documented precondition."""


class EmptyData(ValidationError):
    """No subjects or no covariate columns."""


class NonFiniteValue(ValidationError):
    """A NaN or infinity where a finite number is required."""


class NonBinaryTreatment(ValidationError):
    """Treatment indicator outside {0, 1}."""


class PropensityOutOfRange(ValidationError):
    """Propensity score not strictly inside (0, 1)."""


class MissingPropensity(ValidationError):
    """A feature-map flag demands a propensity column that is absent."""


class SingleArm(ValidationError):
    """All subjects share one treatment arm; nothing can be contrasted."""


class EmptySubgroup(ValidationError):
    """Subgroup index set selects no subjects."""


class TooFewDraws(ValidationError):
    """Fewer posterior draws than the summary requires."""


class NumericalError(ClsbpError):
    """Numerical breakdown during sampling or root finding."""


class NotPositiveDefinite(NumericalError):
    """Cholesky factorization hit a non-positive pivot."""


class NegativeScale(NumericalError):
    """A variance scale turned negative beyond round-off tolerance."""


class AllZeroLikelihood(NumericalError):
    """Every mixture component underflowed for some subject, even in log space."""


class DegenerateWeights(NumericalError):
    """Categorical weights sum to zero (or are not finite)."""


class SeparationDetected(NumericalError):
    """Logistic regression coefficients diverged (data separable)."""


class BisectionFailure(NumericalError):
    """Quantile bracket could not be established within the search window."""


class DrawsNotFound(ClsbpError):
    """Persisted posterior draws are missing from the given directory."""
