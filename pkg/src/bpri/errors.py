"""Exception and warning types shared across the solvers."""


class BpriError(ValueError):
    """Base class for invalid inputs and unrecoverable numeric failures."""


class NonSimplexInput(BpriError):
    pass


class SupportViolation(BpriError):
    pass


class DimensionMismatch(BpriError):
    pass


class EmptySupport(BpriError):
    pass


class NonFiniteLoss(BpriError):
    pass


class CapacityOutOfRange(BpriError):
    pass


class SingularMatrix(BpriError):
    pass


class DimensionTooSmall(BpriError):
    pass


class ConvergenceWarning(RuntimeWarning):
    """Solver stopped without meeting its tolerance; the result is flagged."""


class MaxIterExceeded(ConvergenceWarning):
    pass


class MaxOuterExceeded(ConvergenceWarning):
    pass


class NonMonotoneBracket(ConvergenceWarning):
    pass
