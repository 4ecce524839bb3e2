"""Exception hierarchy shared across the package."""


class BatchDistError(Exception):
    """Base class for all package errors."""


class InvalidInputError(BatchDistError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(BatchDistError, ValueError):
    """A plant/scenario configuration is infeasible or inconsistent."""


class ConvergenceError(BatchDistError, ArithmeticError):
    """An iterative solve failed; ``residual`` holds the final residual norm."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class BubblePointError(ConvergenceError):
    pass


class FactorizationError(ConvergenceError):
    """The Newton matrix could not be factorised."""


class StateViolationError(BatchDistError):
    """A converged state left the model's validity region.

    ``stage`` is the 1-based stage index (0 for the buffer vessel, ``None``
    when not stage specific).
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class StepSizeError(BatchDistError):
    """The step controller fell below ``dt_min``."""


class ParseError(BatchDistError, ValueError):
    """Schema violation in a configuration document; ``path`` locates it."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ValidationError(BatchDistError, ValueError):
    """Parsed values violate a physical or unit constraint."""


class CalibrationError(BatchDistError):
    pass


class ComparisonError(BatchDistError):
    pass


class OutputError(BatchDistError, OSError):
    """Writing or reading a dataset file failed; ``path`` names the file."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = str(path)


class LayoutCollisionError(OutputError):
    """An existing configuration file differs from the one being written."""
