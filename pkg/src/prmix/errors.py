"""Exception types shared across the package."""


class PrmixError(Exception):
    """Base class for all package errors."""


class DomainError(PrmixError):
    """An observation or support point is outside the kernel's domain."""


class DegenerateDataError(PrmixError):
    """The predictive density vanished at an observation.

    Raised when the model places (numerically) zero mass on an incoming
    data point, which signals that the data lie outside the support of
    the postulated mixture (e.g. positive counts with a zero-only grid).
    """

    def __init__(self, step: int, value, message: str | None = None):
        self.step = step
        self.value = value
        super().__init__(
            message
            or f"predictive density underflowed at step {step} "
            f"(observation {value!r}); data outside model support?"
        )


class NumericalError(PrmixError):
    """A quadrature or iterative routine failed to reach its tolerance."""


class DataFormatError(PrmixError):
    """A data file could not be parsed."""

    def __init__(self, path, line_no: int | None, message: str):
        self.path = path
        self.line_no = line_no
        where = f"{path}:{line_no}" if line_no is not None else str(path)
        super().__init__(f"{where}: {message}")


class ConfigError(PrmixError):
    """An invalid run configuration."""
