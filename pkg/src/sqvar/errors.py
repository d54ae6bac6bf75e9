"""Exception types raised across the package."""


class SqvarError(Exception):
    """Base class for all package errors."""


class NonFinite(SqvarError, ValueError):
    """An input or intermediate quantity contains NaN or Inf."""


class DimensionMismatch(SqvarError, ValueError):
    pass


class NotSymmetric(SqvarError, ValueError):
    pass


class NotPsd(SqvarError, ValueError):
    """Matrix has an eigenvalue below the allowed negative tolerance."""


class NotFeasible(SqvarError, ValueError):
    pass


class BadDimension(SqvarError, ValueError):
    pass


class BadWidth(SqvarError, ValueError):
    """Factor width smaller than the numerical rank of the target matrix."""


class SubspaceViolation(SqvarError, ValueError):
    """Direction W does not satisfy V_X^T W V_X = 0."""


class EigenvalueConditionViolated(SqvarError, ValueError):
    """Two nonzero eigenvalues of a symmetric factor sum to (numerically) zero."""


class NotFirstOrder(SqvarError, ValueError):
    pass


class Stalled(SqvarError, RuntimeError):
    """An iterative method made no progress within its budget."""
