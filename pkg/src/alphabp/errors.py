"""Exception hierarchy shared by all modules."""


class AlphaBPError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(AlphaBPError, ValueError):
    """Malformed graph or model structure."""


class DomainError(AlphaBPError, ValueError):
    """A value lies outside its admissible domain (nonpositive entry, unknown state)."""


class ParameterError(AlphaBPError, ValueError):
    """An algorithm parameter is out of range."""


class CapacityError(AlphaBPError):
    """An exhaustive computation would exceed the enumeration guard."""


class DegenerateMessageError(AlphaBPError, FloatingPointError):
    """A normalized message entry fell below the degeneracy threshold."""


class NumericalError(AlphaBPError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, msg, iterate=None):
        super().__init__(msg)
        self.iterate = iterate


class SamplingExhausted(AlphaBPError):
    """Certified sampling ran out of retries."""

    def __init__(self, msg, last_lambda=None):
        super().__init__(msg)
        self.last_lambda = last_lambda
