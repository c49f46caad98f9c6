"""Exception hierarchy shared by all modules."""


class HenonAIError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(HenonAIError, ValueError):
    pass


class ZeroJacobian(HenonAIError, ValueError):
    """The Hénon map is not invertible at b = 0."""


class NotHyperbolic(HenonAIError):
    pass


class BudgetExceeded(HenonAIError):
    pass


class NotOnLambda(HenonAIError, ValueError):
    pass


class ContinuationError(HenonAIError):
    """Raised when a solver cannot produce a zero of the residual.

    The partially iterated result, if any, is kept on ``result`` so batch
    callers can still report residual norms and iteration counts.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoConvergence(ContinuationError):
    pass


class SingularJacobian(ContinuationError):
    pass


class SingularAnchorJacobian(SingularJacobian):
    pass


class NotConverged(HenonAIError, ValueError):
    pass


class Divergence(HenonAIError):
    pass


class EmptyInput(HenonAIError, ValueError):
    pass


class DomainError(HenonAIError, ValueError):
    pass
