"""Exception hierarchy shared across the package."""


class DriverSelectError(Exception):
    """Base class for all package errors."""


class ConfigError(DriverSelectError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class EdgeListParseError(ConfigError):
    """Malformed edge-list file. Carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class InfeasibleError(ConfigError):
    """A selection problem admits no finite-cost solution."""


class NumericalError(DriverSelectError, ArithmeticError):
    """A numerical routine failed (factorization, integration budget, ...)."""


class NotHurwitzError(NumericalError):
    """The state matrix is not Hurwitz where a stable matrix is required."""

    def __init__(self, abscissa):
        self.abscissa = float(abscissa)
        super().__init__(
            f"state matrix is not Hurwitz: spectral abscissa = {self.abscissa:.6g}"
        )
