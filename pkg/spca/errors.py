class SpcaError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(SpcaError, ValueError):
    pass


class DimensionMismatchError(InvalidArgumentError):
    pass


class DegenerateInputError(SpcaError, ArithmeticError):
    """The data carry no usable signal (all fidelities zero, zero-norm columns)."""


class DataFormatError(SpcaError, ValueError):
    pass


class DiagnosticViolation(SpcaError):
    pass
