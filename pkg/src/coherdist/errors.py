"""Exception types raised across the package."""


class CoherdistError(Exception):
    pass


class InvalidStateError(CoherdistError, ValueError):
    pass


class InvalidArgumentError(CoherdistError, ValueError):
    pass


class UnsupportedInputError(CoherdistError, ValueError):
    pass


class InvalidChannelError(CoherdistError, ValueError):
    pass


class InfeasibleConversionError(CoherdistError):
    """Raised when the source state is not majorized by the target."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class CircuitError(CoherdistError, ValueError):
    pass


class LeakageError(CircuitError):
    def __init__(self, message, leaked_weight):
        super().__init__(message)
        self.leaked_weight = leaked_weight
