"""Exception hierarchy shared by all modules."""


class HJBRError(Exception):
    """Base class for every error raised by the package."""


class InvalidParamsError(HJBRError, ValueError):
    """Model parameters violate a documented invariant."""


class InvalidInputError(HJBRError, ValueError):
    """A call precondition does not hold (e.g. a state outside the domain)."""


class UnsupportedDimensionError(HJBRError, ValueError):
    """The requested operation is only available for one-dimensional domains."""


class NoConvergenceError(HJBRError, RuntimeError):
    """Policy iteration hit ``max_iter`` without meeting its tolerance."""

    def __init__(self, message, iterations=None, last_update=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_update = last_update


class ConfigError(HJBRError, ValueError):
    """Base class for run-configuration problems."""


class ConfigParseError(ConfigError):
    """The configuration text is malformed."""


class ConfigValidationError(ConfigError):
    """A configuration value violates a constraint."""


class UnknownKeyError(ConfigError):
    """The configuration contains a key or section that is not recognised."""
