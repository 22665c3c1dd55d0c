"""Exception types raised by the library."""


class SuperGaussError(ValueError):
    """Base class for all library errors."""


class InvalidDimension(SuperGaussError):
    pass


class InvalidInput(SuperGaussError):
    pass


class DegenerateCombination(SuperGaussError):
    """theta1 - theta2 + theta3 vanished; the caller should redraw theta3."""


class ValidationError(SuperGaussError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(SuperGaussError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CombinatorialBudgetExceeded(SuperGaussError):
    pass


class SelectionImpossible(SuperGaussError):
    pass


class DimensionTooSmall(SuperGaussError):
    pass


class ResamplingFailed(SuperGaussError):
    pass


class DegenerateDirection(SuperGaussError):
    pass


class InsufficientTail(SuperGaussError):
    pass


class StageError(SuperGaussError):
    """Wraps an error raised inside one pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
